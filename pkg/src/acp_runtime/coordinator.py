"""Final coordination layer: render stored outputs into a deliverable."""

from __future__ import annotations

import re

from .blueprint import ExecutionBlueprint, NodeStatus
from .errors import TemplateSlotUnknownNode

SLOT = re.compile(r"\{\{\s*([^{}\s]+)\s*\}\}")


def gap_marker(node_id: str, reason) -> str:
    return f"[unavailable: {node_id}, {reason}]"


def _split(slot: str) -> tuple[str, str]:
    node_id, _, output = slot.rpartition(".")
    if not node_id:
        return slot, ""
    return node_id, output


def _value(bp: ExecutionBlueprint, slot: str) -> str:
    node_id, output = _split(slot)
    if node_id not in bp:
        raise TemplateSlotUnknownNode(slot, node_id)
    node = bp.node(node_id)
    value = bp.output_store.get((node_id, output))
    if value is not None and node.status is NodeStatus.SUCCEEDED:
        return value
    if node.status is NodeStatus.FAILED:
        return gap_marker(node_id, node.last_error if node.last_error is not None else "failed")
    if node.status is NodeStatus.SUCCEEDED:
        return gap_marker(node_id, f"no output {output!r}")
    return gap_marker(node_id, node.status.value.lower())


def aggregate(bp: ExecutionBlueprint, template: str) -> str:
    """Substitute ``{{node_id.output}}`` slots with stored values.

    Slots whose producer did not succeed render as a gap marker instead of
    failing the whole deliverable; only a slot naming an unknown node raises.
    """
    for m in SLOT.finditer(template):
        node_id, _ = _split(m.group(1))
        if node_id not in bp:
            raise TemplateSlotUnknownNode(m.group(1), node_id)
    return SLOT.sub(lambda m: _value(bp, m.group(1)), template)


def answer_extract(bp: ExecutionBlueprint, slot: str) -> str:
    """Content of one output variable, verbatim, or its gap marker."""
    node_id, _ = _split(slot)
    if node_id not in bp:
        return gap_marker(node_id, "unknown node")
    return _value(bp, slot)
