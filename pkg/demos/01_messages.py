"""Build the three message kinds, encode them, and read them back.

A weather step cannot run because its tool needs coordinates that nothing
upstream produced. The agent answers with a 601 and asks for help; the
request stage is recovered from the code alone.
"""

from acp_runtime import (
    AgentRequest,
    AgentResponse,
    AssistanceRequest,
    OutputVariable,
    Resolution,
    StatusCode,
    StatusUpdate,
    SuggestedResolution,
    classify_stage,
    decode_message,
    encode_message,
)

request = AgentRequest("FUNCTION", "perplexity_api_response",
                       headers={"api_key": "not-a-real-key"},
                       body=(("query", "Top vacation spots in the USA for this summer"),))
response = AgentResponse(StatusCode.OK, (OutputVariable("spots", "Yosemite, Maui, Acadia"),))
help_wanted = AssistanceRequest(
    StatusCode.MISSING_REQUIRED_PARAMETERS, "s1.step2", "open-meteo",
    "weather lookup needs latitude and longitude", "spots: Yosemite, Maui, Acadia",
    SuggestedResolution(Resolution.REROUTE, "add a step to obtain latitude and longitude"),
    StatusUpdate("vacation spots retrieved", "weather lookup blocked", "s1.step2",
                 (("perplexity", "listed vacation spots"),), "no coordinates"),
)

for msg in (request, response, help_wanted):
    wire = encode_message(msg)
    back = decode_message(wire)
    assert back == msg
    print(f"{msg.kind:<19} {len(wire):4d} bytes  round-trip ok")

code = help_wanted.error
print(f"\ncode {int(code)} ({code.name}), stage {classify_stage(code).value}")
print("suggested:", help_wanted.suggested_resolution.action.value, "-",
      help_wanted.suggested_resolution.rationale)
