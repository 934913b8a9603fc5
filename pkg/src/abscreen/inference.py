"""Client for a chat-completions style inference endpoint.

The harness never hosts model weights: prompts go out over the widely
deployed ``/v1/chat/completions`` (message lists) or ``/v1/completions``
(plain instruction prompts) wire shapes and raw generations come back.
Decoding defaults are deterministic: temperature 0, no sampling, one beam.

Both the HTTP transport and the latency clock are injectable so the whole
dispatch path can be exercised hermetically in tests.
"""

from __future__ import annotations

import json
import os
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import requests

from .corpus import ScreeningDecision
from .errors import (
    AmbiguousResponseError,
    ConfigError,
    EndpointError,
    ProtocolError,
)
from .jsonl import iter_records, write_records
from .promptgen import PromptBundle, alpaca_prompt

# transport(url, payload, headers, timeout_s) -> (status_code, body_text)
Transport = Callable[[str, dict, dict, float], "tuple[int, str]"]


@dataclass(frozen=True)
class EndpointConfig:
    """Connection and decoding settings for one endpoint."""

    base_url: str
    model: str
    temperature: float = 0.0
    sampling: bool = False
    beams: int = 1
    max_new_tokens: int = 256
    timeout_s: float = 60.0
    retries: int = 2
    parallelism: int = 1
    token_env: str | None = None
    backoff_s: float = 0.5

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.retries < 0:
            raise ConfigError("retries must be >= 0")
        if self.beams < 1:
            raise ConfigError("beam count must be >= 1")


@dataclass(frozen=True)
class ModelResponse:
    raw_text: str
    latency_ms: float
    bundle_id: str | None = None


class PredictionStatus(Enum):
    OK = "ok"
    AMBIGUOUS = "AMBIGUOUS"
    ERROR = "ERROR"


@dataclass(frozen=True)
class PredictionRecord:
    """One per input bundle, success or failure, in input order."""

    bundle_id: str
    status: PredictionStatus
    decision: ScreeningDecision | None
    raw_text: str
    latency_ms: float
    error: str | None = field(default=None, compare=False)


def _requests_transport(url: str, payload: dict, headers: dict,
                        timeout: float) -> tuple[int, str]:
    resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    return resp.status_code, resp.text


class InferenceClient:
    """Dispatches single prompts with retry; safe for concurrent use."""

    def __init__(self, config: EndpointConfig, transport: Transport | None = None,
                 clock: Callable[[], float] | None = None,
                 sleep: Callable[[float], None] = time.sleep,
                 rng: random.Random | None = None):
        self.config = config
        self._transport = transport or _requests_transport
        self._clock = clock or time.monotonic
        self._sleep = sleep
        self._rng = rng or random.Random()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.token_env:
            token = os.environ.get(self.config.token_env)
            if not token:
                raise ConfigError(
                    f"endpoint token variable {self.config.token_env!r} is not set")
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _payload(self, prompt: str | Sequence[dict]) -> tuple[str, dict]:
        cfg = self.config
        common = {
            "model": cfg.model,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_new_tokens,
            # Extension fields understood by local model servers.
            "do_sample": cfg.sampling,
            "num_beams": cfg.beams,
        }
        if isinstance(prompt, str):
            url = cfg.base_url.rstrip("/") + "/v1/completions"
            return url, {**common, "prompt": prompt}
        url = cfg.base_url.rstrip("/") + "/v1/chat/completions"
        return url, {**common, "messages": list(prompt)}

    def complete(self, prompt: str | Sequence[dict],
                 bundle_id: str | None = None) -> ModelResponse:
        """Send one prompt; returns the raw completion text and latency.

        Transport failures are retried with exponential backoff and jitter
        (idempotent at temperature 0); non-success statuses fail fast.
        """
        url, payload = self._payload(prompt)
        headers = self._headers()
        attempts = self.config.retries + 1
        last_exc: Exception | None = None
        for attempt in range(attempts):
            start = self._clock()
            try:
                status, body = self._transport(url, payload, headers,
                                               self.config.timeout_s)
            except (requests.RequestException, OSError) as exc:
                last_exc = exc
                if attempt + 1 < attempts:
                    delay = self.config.backoff_s * (2 ** attempt)
                    self._sleep(delay * (1.0 + self._rng.uniform(0.0, 0.25)))
                continue
            latency_ms = (self._clock() - start) * 1000.0
            if not 200 <= status < 300:
                raise ProtocolError("endpoint returned non-success status",
                                    status=status, body=body)
            return ModelResponse(_extract_text(body, chat="messages" in payload),
                                 latency_ms, bundle_id)
        raise EndpointError(f"endpoint unreachable: {last_exc}", attempts)


def _extract_text(body: str, chat: bool) -> str:
    try:
        obj = json.loads(body)
        choice = obj["choices"][0]
        return choice["message"]["content"] if chat else choice["text"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"malformed completion body ({exc})", body=body) from exc


_DECISION_RE = re.compile(r"\b(include[d]?|exclude[d]?)\b", re.IGNORECASE)


def parse_decision(raw_text: str) -> ScreeningDecision:
    """Decide from the first whole-word include/exclude mention.

    Matches any of included/include/excluded/exclude, case-insensitively;
    when both families occur the earliest one wins. No match raises
    :class:`AmbiguousResponseError`.
    """
    m = _DECISION_RE.search(raw_text)
    if m is None:
        raise AmbiguousResponseError(
            f"no include/exclude keyword in response: {raw_text[:80]!r}")
    word = m.group(1).lower()
    return ScreeningDecision.INCLUDE if word.startswith("incl") else ScreeningDecision.EXCLUDE


def _bundle_prompt(bundle: PromptBundle) -> str:
    return alpaca_prompt(bundle.instruction, bundle.input)


def _dispatch(bundles: Sequence[PromptBundle], client: InferenceClient,
              parallelism: int, worker) -> list:
    if parallelism == 1:
        return [worker(b) for b in bundles]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(worker, bundles))


def run_screening(bundles: Sequence[PromptBundle], config: EndpointConfig,
                  transport: Transport | None = None,
                  clock: Callable[[], float] | None = None) -> list[PredictionRecord]:
    """Screen every bundle; output order equals input order at any
    parallelism, and per-item failures are recorded, never dropped."""
    client = InferenceClient(config, transport=transport, clock=clock)

    def worker(bundle: PromptBundle) -> PredictionRecord:
        bid = bundle.bundle_id
        try:
            response = client.complete(_bundle_prompt(bundle), bundle_id=bid)
        except (EndpointError, ProtocolError) as exc:
            return PredictionRecord(bid, PredictionStatus.ERROR, None, "", 0.0,
                                    error=str(exc))
        try:
            decision = parse_decision(response.raw_text)
        except AmbiguousResponseError as exc:
            return PredictionRecord(bid, PredictionStatus.AMBIGUOUS, None,
                                    response.raw_text, response.latency_ms,
                                    error=str(exc))
        return PredictionRecord(bid, PredictionStatus.OK, decision,
                                response.raw_text, response.latency_ms)

    return _dispatch(bundles, client, config.parallelism, worker)


def run_exclusion_reasons(bundles: Sequence[PromptBundle], config: EndpointConfig,
                          transport: Transport | None = None,
                          clock: Callable[[], float] | None = None,
                          ) -> list[PredictionRecord]:
    """Collect raw exclusion-reason generations, kept whole.

    Empty completions are legal (flagged downstream, not errors); endpoint
    failures are recorded per item.
    """
    client = InferenceClient(config, transport=transport, clock=clock)

    def worker(bundle: PromptBundle) -> PredictionRecord:
        bid = bundle.bundle_id
        try:
            response = client.complete(_bundle_prompt(bundle), bundle_id=bid)
        except (EndpointError, ProtocolError) as exc:
            return PredictionRecord(bid, PredictionStatus.ERROR, None, "", 0.0,
                                    error=str(exc))
        return PredictionRecord(bid, PredictionStatus.OK, None,
                                response.raw_text, response.latency_ms)

    return _dispatch(bundles, client, config.parallelism, worker)


@dataclass(frozen=True)
class BenchRow:
    batch_size: int
    mean_ms_per_sample: float


def bench_latency(bundles: Sequence[PromptBundle], config: EndpointConfig,
                  batch_sizes: Sequence[int],
                  transport: Transport | None = None,
                  clock: Callable[[], float] | None = None) -> list[BenchRow]:
    """Client-side wall-clock time per sample for each batch size.

    A batch of size b is emulated by dispatching b requests concurrently;
    server memory is not observable from here, so no memory column exists.
    """
    if not bundles:
        raise ConfigError("bench requires at least one bundle")
    client = InferenceClient(config, transport=transport, clock=clock)
    timer = clock or time.monotonic
    rows: list[BenchRow] = []
    for batch_size in batch_sizes:
        if batch_size < 1:
            raise ConfigError("batch sizes must be >= 1")
        start = timer()
        for i in range(0, len(bundles), batch_size):
            chunk = bundles[i:i + batch_size]
            if batch_size == 1:
                client.complete(_bundle_prompt(chunk[0]), bundle_id=chunk[0].bundle_id)
            else:
                with ThreadPoolExecutor(max_workers=batch_size) as pool:
                    list(pool.map(
                        lambda b: client.complete(_bundle_prompt(b), bundle_id=b.bundle_id),
                        chunk))
        elapsed_ms = (timer() - start) * 1000.0
        rows.append(BenchRow(batch_size, elapsed_ms / len(bundles)))
    return rows


def predictions_to_records(predictions: Sequence[PredictionRecord]) -> list[dict]:
    out = []
    for p in predictions:
        decision = p.decision.to_wire() if p.decision is not None else p.status.value
        out.append({
            "bundle_id": p.bundle_id,
            "decision": decision,
            "raw_text": p.raw_text,
            "latency_ms": int(round(p.latency_ms)),
        })
    return out


def write_predictions(path, predictions: Sequence[PredictionRecord],
                      header: dict | None = None) -> None:
    write_records(path, predictions_to_records(predictions), header=header)


def load_predictions(path) -> list[PredictionRecord]:
    records = []
    for _, obj in iter_records(path):
        decision_field = obj["decision"]
        if decision_field == PredictionStatus.AMBIGUOUS.value:
            status, decision = PredictionStatus.AMBIGUOUS, None
        elif decision_field == PredictionStatus.ERROR.value:
            status, decision = PredictionStatus.ERROR, None
        else:
            status, decision = PredictionStatus.OK, ScreeningDecision.from_wire(decision_field)
        records.append(PredictionRecord(
            bundle_id=obj["bundle_id"],
            status=status,
            decision=decision,
            raw_text=obj.get("raw_text", ""),
            latency_ms=float(obj.get("latency_ms", 0)),
        ))
    return records
