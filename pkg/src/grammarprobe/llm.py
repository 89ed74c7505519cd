"""Provider-agnostic chat-completion access.

One client serves every pipeline stage: bounded concurrency via a global
semaphore, exponential-backoff retries for transient failures, and a
content-addressed transcript cache keyed by the canonical request hash.
Replay mode answers exclusively from recorded transcripts and performs zero
network activity, which is what makes full pipeline runs auditable and
byte-deterministic offline.
"""

from __future__ import annotations

import os
import random
import sys
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .config import DEFAULT_TEMPERATURES
from .errors import (
    AuthError,
    CacheCorrupt,
    ContextTooLong,
    LlmTransientError,
    LlmUnavailable,
    ReplayMiss,
    ScriptExhausted,
)
from .hashio import content_hash, read_json, write_json
from .sampling import DetRng, derive_seed

PURPOSES = ("extract", "generate", "backcheck", "forge", "task", "translate", "judge")


@dataclass(frozen=True)
class LlmRequest:
    provider: str
    model_id: str
    messages: tuple[tuple[str, str], ...]   # (role, content), order significant
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: int | None = None
    purpose: str = "task"

    def canonical(self) -> dict:
        params: dict = {"temperature": self.temperature, "max_tokens": self.max_tokens}
        if self.seed is not None:
            params["seed"] = self.seed
        return {
            "provider": self.provider,
            "model_id": self.model_id,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "params": params,
        }


def request_hash(req: LlmRequest) -> str:
    """Canonical hash: params sorted, message content hashed verbatim."""
    return content_hash(req.canonical())


def make_request(provider: str, model_id: str, messages, purpose: str,
                 temperature: float | None = None, max_tokens: int = 1024,
                 seed: int | None = None) -> LlmRequest:
    if purpose not in PURPOSES:
        raise ValueError(f"unknown purpose {purpose!r}")
    if temperature is None:
        temperature = DEFAULT_TEMPERATURES[purpose]
    return LlmRequest(provider=provider, model_id=model_id,
                      messages=tuple((r, c) for r, c in messages),
                      temperature=temperature, max_tokens=max_tokens,
                      seed=seed, purpose=purpose)


@dataclass
class Completion:
    text: str
    usage: dict
    cached: bool = False
    latency_ms: int = 0


class Provider:
    """Interface: subclasses answer one request at a time.

    ``side`` is a test-harness-only side channel (hidden keys, label sets);
    real providers must ignore it and it never enters the request hash.
    """

    name = "provider"

    def __init__(self):
        self.calls = 0

    def complete(self, req: LlmRequest, side: dict | None = None) -> Completion:
        raise NotImplementedError


class HttpProvider(Provider):
    """OpenAI-style chat-completions endpoint."""

    def __init__(self, name: str, base_url: str, api_key_env: str,
                 model_map: dict[str, str] | None = None, timeout: float = 120.0):
        super().__init__()
        self.name = name
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.model_map = model_map or {}
        self.timeout = timeout

    def complete(self, req: LlmRequest, side: dict | None = None) -> Completion:
        self.calls += 1
        key = os.environ.get(self.api_key_env)
        if not key:
            raise AuthError(f"provider {self.name!r} needs credential in "
                            f"environment variable {self.api_key_env}")
        payload: dict = {
            "model": self.model_map.get(req.model_id, req.model_id),
            "messages": [{"role": r, "content": c} for r, c in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.seed is not None:
            payload["seed"] = req.seed
        started = time.monotonic()
        try:
            resp = httpx.post(f"{self.base_url}/chat/completions", json=payload,
                              headers={"Authorization": f"Bearer {key}"},
                              timeout=self.timeout)
        except httpx.HTTPError as e:
            raise LlmTransientError(f"{self.name}: {e}") from e
        if resp.status_code in (401, 403):
            raise AuthError(f"{self.name}: {resp.status_code} {resp.text[:200]}")
        if resp.status_code == 400 and "context" in resp.text.lower():
            raise ContextTooLong(f"{self.name}: {resp.text[:200]}")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise LlmTransientError(f"{self.name}: {resp.status_code}")
        if resp.status_code != 200:
            raise LlmUnavailable(f"{self.name}: unexpected {resp.status_code} "
                                 f"{resp.text[:200]}")
        data = resp.json()
        text = data["choices"][0]["message"]["content"]
        return Completion(text=text, usage=data.get("usage", {}),
                          latency_ms=int((time.monotonic() - started) * 1000))


class ScriptedProvider(Provider):
    """Replays an ordered list of canned replies.

    Rules are either plain strings (consumed in order) or
    ``(substring, reply)`` pairs matched against the last user message; a
    matched pair is not consumed. Raises :class:`ScriptExhausted` when no
    rule applies.
    """

    name = "mock"

    def __init__(self, rules):
        super().__init__()
        self._queue = [r for r in rules if isinstance(r, str)]
        self._patterns = [r for r in rules if not isinstance(r, str)]

    def complete(self, req: LlmRequest, side: dict | None = None) -> Completion:
        self.calls += 1
        prompt = req.messages[-1][1]
        for needle, reply in self._patterns:
            if needle in prompt:
                return Completion(text=reply, usage={})
        if self._queue:
            return Completion(text=self._queue.pop(0), usage={})
        raise ScriptExhausted(f"no scripted reply for request ({len(self._patterns)} "
                              "patterns tried, queue empty)")


def _per_call_rng(seed: int, req: LlmRequest, side: dict | None) -> DetRng:
    """Stateless per-call stream: identical under any completion order."""
    marker = (side or {}).get("instance_id", "")
    return DetRng(derive_seed(seed, marker, req.messages[-1][1]))


class OracleProvider(Provider):
    """Answers task prompts with the hidden key from the side channel.

    With ``flip_rate`` > 0 it deliberately answers *incorrectly* that
    fraction of the time (uniformly over wrong answers), so its measured
    accuracy should track ``1 - flip_rate`` exactly. Decisions are derived
    from a per-call hash, so results do not depend on call order.
    """

    name = "mock"

    def __init__(self, flip_rate: float = 0.0, seed: int = 0):
        super().__init__()
        if not 0.0 <= flip_rate <= 1.0:
            raise ValueError("flip_rate must be in [0, 1]")
        self.flip_rate = flip_rate
        self.seed = seed

    def complete(self, req: LlmRequest, side: dict | None = None) -> Completion:
        self.calls += 1
        if not side or "key" not in side:
            raise ScriptExhausted("oracle provider needs the side channel")
        key = sorted(side["key"])
        labels = list(side["labels"])
        rng = _per_call_rng(self.seed, req, side)
        if self.flip_rate > 0 and rng.random() < self.flip_rate:
            while True:
                wrong = sorted(rng.sample(labels, len(key)))
                if wrong != key:
                    break
            key = wrong
        return Completion(text="ANSWER: " + ", ".join(key), usage={})


class RandomAnswerProvider(Provider):
    """Uniform-random answering: the chance floor made executable."""

    name = "mock"

    def __init__(self, seed: int):
        super().__init__()
        self.seed = seed

    def complete(self, req: LlmRequest, side: dict | None = None) -> Completion:
        self.calls += 1
        if not side or "labels" not in side:
            raise ScriptExhausted("random provider needs the side channel")
        labels = list(side["labels"])
        pick = side.get("pick", 1)
        rng = _per_call_rng(self.seed, req, side)
        answer = sorted(rng.sample(labels, pick))
        return Completion(text="ANSWER: " + ", ".join(answer), usage={})


class FlakyProvider(Provider):
    """Test helper: fail transiently N times, then delegate."""

    name = "mock"

    def __init__(self, inner: Provider, fail_times: int):
        super().__init__()
        self.inner = inner
        self.fail_times = fail_times

    def complete(self, req: LlmRequest, side: dict | None = None) -> Completion:
        self.calls += 1
        if self.fail_times > 0:
            self.fail_times -= 1
            raise LlmTransientError("synthetic transient failure")
        return self.inner.complete(req, side)


def mock_provider(script=None, oracle: bool = False, flip_rate: float = 0.0,
                  random_seed: int | None = None) -> Provider:
    """Factory covering the three mock flavors used by the harness."""
    if script is not None:
        return ScriptedProvider(script)
    if oracle:
        return OracleProvider(flip_rate=flip_rate)
    if random_seed is not None:
        return RandomAnswerProvider(random_seed)
    raise ValueError("specify script=, oracle=True, or random_seed=")


class TranscriptCache:
    """Append-only transcript store: ``<root>/<hash[:2]>/<hash>.json``."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, h: str) -> Path:
        return self.root / h[:2] / f"{h}.json"

    def get(self, h: str) -> dict | None:
        path = self.path_for(h)
        if not path.exists():
            return None
        record = read_json(path)
        if record.get("request_hash") != h:
            raise CacheCorrupt(f"transcript {path} does not match its key {h}")
        return record

    def put(self, h: str, req: LlmRequest, completion: Completion) -> None:
        record = {
            "request_hash": h,
            "request": req.canonical(),
            "response_text": completion.text,
            "usage": completion.usage,
            "timestamp": time.time(),
        }
        write_json(self.path_for(h), record)

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*/*.json"))


class LlmClient:
    """Shared completion client with retries, caching, and a call budget.

    Thread-safe: the semaphore bounds in-flight upstream calls and the cache
    writes are atomic, so concurrent workers can share one instance.
    """

    def __init__(self, providers: dict[str, Provider],
                 cache: TranscriptCache | None = None,
                 replay_only: bool = False,
                 concurrency: int = 4,
                 retries: int = 4,
                 backoff_base: float = 0.5,
                 backoff_cap: float = 30.0,
                 sleep=time.sleep):
        self.providers = providers
        self.cache = cache
        self.replay_only = replay_only
        self.retries = retries
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self._sleep = sleep
        self._sem = threading.Semaphore(concurrency)
        self._lock = threading.Lock()
        self.live_calls = 0
        self.cache_hits = 0
        self._jitter = random.Random(0)

    def _provider(self, name: str) -> Provider:
        try:
            return self.providers[name]
        except KeyError:
            raise LlmUnavailable(f"no provider named {name!r} configured") from None

    def complete(self, req: LlmRequest, side: dict | None = None) -> str:
        """Uncached completion with retry/backoff. Returns the assistant text."""
        return self._complete(req, side).text

    def _complete(self, req: LlmRequest, side: dict | None = None) -> Completion:
        provider = self._provider(req.provider)
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                delay = min(self.backoff_cap, self.backoff_base * 2 ** (attempt - 1))
                self._sleep(delay * (0.5 + self._jitter.random()))
            try:
                with self._sem:
                    with self._lock:
                        self.live_calls += 1
                    started = time.monotonic()
                    completion = provider.complete(req, side)
                if not completion.latency_ms:
                    completion.latency_ms = int((time.monotonic() - started) * 1000)
                return completion
            except LlmTransientError as e:
                last = e
        raise LlmUnavailable(f"retry budget exhausted after {self.retries + 1} "
                             f"attempts: {last}")

    def cached_complete(self, req: LlmRequest, side: dict | None = None) -> str:
        return self.call(req, side).text

    def call(self, req: LlmRequest, side: dict | None = None) -> Completion:
        """Cache-aware completion; cache hits report zero latency."""
        if self.cache is None:
            if self.replay_only:
                raise ReplayMiss(request_hash(req))
            return self._complete(req, side)
        h = request_hash(req)
        record = self.cache.get(h)
        if record is not None:
            with self._lock:
                self.cache_hits += 1
            return Completion(text=record["response_text"],
                              usage=record.get("usage", {}), cached=True)
        if self.replay_only:
            raise ReplayMiss(h)
        completion = self._complete(req, side)
        self.cache.put(h, req, completion)
        return completion


def load_providers(path: str | Path) -> dict[str, Provider]:
    """Read a providers TOML file: name, base URL, credential env var, model map."""
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with open(path, "rb") as f:
        data = tomllib.load(f)
    providers: dict[str, Provider] = {}
    for name, entry in data.get("providers", {}).items():
        providers[name] = HttpProvider(
            name=name,
            base_url=entry["base_url"],
            api_key_env=entry["api_key_env"],
            model_map=entry.get("model_map"),
            timeout=float(entry.get("timeout", 120.0)),
        )
    return providers
