"""Adapter that maps agent requests onto HTTP calls."""

from __future__ import annotations

import json
import os
import re
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass

from ..errors import HttpToolError
from .registry import CallContext, ToolAdapter, ToolSchema, Validator

_BODY_METHODS = {"FUNCTION", "POST", "PUT", "PATCH"}


def default_key_env(tool_name: str) -> str:
    return "ACP_TOOL_" + re.sub(r"[^A-Za-z0-9]", "_", tool_name).upper() + "_KEY"


@dataclass(frozen=True)
class AuthConfig:
    """Credential injection. The secret comes from the environment, never from blueprint files."""

    header: str = "Authorization"
    env: str | None = None
    prefix: str = "Bearer "


class HttpAdapter(ToolAdapter):
    def __init__(self, schema: ToolSchema, base_url: str, auth: AuthConfig | None = None,
                 validator: Validator | None = None):
        parsed = urllib.parse.urlparse(base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValueError(f"not a usable base url: {base_url!r}")
        self.schema = schema
        self.base_url = base_url.rstrip("/")
        self.auth = auth
        self.validator = validator

    def url_for(self, endpoint: str) -> str:
        if re.match(r"https?://", endpoint):
            return endpoint
        return f"{self.base_url}/{endpoint.lstrip('/')}"

    def invoke(self, request, ctx: CallContext) -> str:
        method = request.method.upper()
        url = self.url_for(request.endpoint)
        headers = dict(request.headers)
        data = None
        if method in _BODY_METHODS:
            data = json.dumps(request.body_dict(), sort_keys=True).encode("utf-8")
            headers.setdefault("Content-Type", "application/json")
            method = "POST" if method == "FUNCTION" else method
        elif request.body:
            url += ("&" if "?" in url else "?") + urllib.parse.urlencode(request.body)
        if self.auth is not None:
            secret = os.environ.get(self.auth.env or default_key_env(self.schema.name))
            if secret:
                headers[self.auth.header] = self.auth.prefix + secret
        req = urllib.request.Request(url, data=data, headers=headers, method=method)
        try:
            with urllib.request.urlopen(req, timeout=ctx.timeout) as resp:
                return resp.read().decode("utf-8", errors="replace")
        except urllib.error.HTTPError as exc:
            raise HttpToolError(f"HTTP {exc.code} from {url}", status=exc.code) from None
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            reason = getattr(exc, "reason", exc)
            if isinstance(reason, TimeoutError) and ctx.timeout is not None:
                raise HttpToolError(f"timeout after {ctx.timeout:g}s calling {url}") from None
            raise HttpToolError(f"transport error calling {url}: {reason}") from None


def http_adapter(schema: ToolSchema, base_url: str, auth: AuthConfig | None = None,
                 validator: Validator | None = None) -> HttpAdapter:
    return HttpAdapter(schema, base_url, auth, validator)
