"""Structured-reply contract (documented in ``docs/llm-replies.md``).

Pipeline prompts instruct the model to answer inside a fenced ```json block.
Parsing is deterministic: the last well-formed fenced block wins, with a
bare-JSON fallback for models that drop the fences. A reply that fails to
parse triggers a repair round-trip; after the retry budget the caller gets
:class:`UnparseableReply` and must skip the unit rather than fabricate data.
"""

from __future__ import annotations

import json
import logging
import re
from typing import Any, Callable

from .errors import UnparseableReply
from .llm import LlmClient, LlmRequest

log = logging.getLogger(__name__)

_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)

REPAIR_PROMPT = (
    "Your previous reply could not be parsed. Reply again with nothing but a "
    "fenced ```json code block containing {shape}."
)


def parse_fenced_json(text: str) -> Any:
    """Last parseable fenced JSON block, else the whole reply as bare JSON."""
    for block in reversed(_FENCE.findall(text)):
        try:
            return json.loads(block)
        except json.JSONDecodeError:
            continue
    try:
        return json.loads(text.strip())
    except json.JSONDecodeError:
        raise UnparseableReply("no parseable JSON payload in reply") from None


def request_structured(client: LlmClient, req: LlmRequest, shape: str,
                       validate: Callable[[Any], Any], retries: int = 3) -> Any:
    """Issue ``req`` and parse its reply, repairing up to ``retries`` times.

    ``validate`` receives the decoded JSON and either returns the value the
    caller wants or raises ``ValueError``; a validation failure counts as a
    parse failure and triggers the repair loop.
    """
    attempts = max(1, retries)
    current = req
    last_error = "no attempt made"
    for _ in range(attempts):
        text = client.cached_complete(current)
        try:
            return validate(parse_fenced_json(text))
        except (UnparseableReply, ValueError) as e:
            last_error = str(e)
            repair = REPAIR_PROMPT.format(shape=shape)
            messages = current.messages + (("assistant", text), ("user", repair))
            current = LlmRequest(provider=current.provider, model_id=current.model_id,
                                 messages=messages, temperature=current.temperature,
                                 max_tokens=current.max_tokens, seed=current.seed,
                                 purpose=current.purpose)
    raise UnparseableReply(f"reply still malformed after {attempts} attempts: "
                           f"{last_error}")
