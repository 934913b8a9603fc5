"""Run configuration: one declarative JSON file plus flag overrides.

Everything that affects an output appears in the config snapshot (and thus
in every output header's digest); secrets stay in environment variables and
only the variable *name* is recorded.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .baseline.preprocess import PreprocessConfig, load_stopwords
from .errors import ConfigError
from .inference import EndpointConfig
from .tokenization import TokenCounter, VocabSpec, make_bpe_counter, make_whitespace_counter

_PATH_KEYS = (
    "reviews_train",
    "studies_train",
    "reviews_test",
    "studies_test",
    "annotations",
    "doi_list",
    "irrelevancy",
    "ratings",
    "vocab",
    "merges",
    "stopwords",
)


@dataclass
class BaselineSettings:
    lam: float = 1.0
    k: int = 5
    ngram_max: int = 1
    max_iters: int = 500
    tol: float = 1e-6


@dataclass
class RunConfig:
    paths: dict[str, str] = field(default_factory=dict)
    counter: str = "whitespace"  # or "bpe" (requires vocab/merges paths)
    max_tokens: int = 2048
    endpoint: dict[str, Any] = field(default_factory=dict)
    baseline: BaselineSettings = field(default_factory=BaselineSettings)
    subset_threshold: int = 100
    per_pair: int = 5
    ambiguous_policy: str = "error"
    seed: int = 0
    output_dir: str = "out"

    @classmethod
    def load(cls, path: str | None, overrides: list[str] | None = None) -> "RunConfig":
        data: dict[str, Any] = {}
        if path is not None:
            p = Path(path)
            if not p.exists():
                raise ConfigError(f"config file does not exist: {p}")
            try:
                data = json.loads(p.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        for item in overrides or []:
            if "=" not in item:
                raise ConfigError(f"override must look like key=value, got {item!r}")
            key, raw = item.split("=", 1)
            try:
                value: Any = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            _set_dotted(data, key.strip(), value)
        return cls._from_dict(data)

    @classmethod
    def _from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "baseline" in kwargs:
            kwargs["baseline"] = BaselineSettings(**kwargs["baseline"])
        cfg = cls(**kwargs)
        if cfg.ambiguous_policy not in ("error", "include", "exclude"):
            raise ConfigError(f"unknown ambiguous_policy {cfg.ambiguous_policy!r}")
        if cfg.counter not in ("whitespace", "bpe"):
            raise ConfigError(f"unknown counter {cfg.counter!r}")
        bad_paths = set(cfg.paths) - set(_PATH_KEYS)
        if bad_paths:
            raise ConfigError(f"unknown path keys: {sorted(bad_paths)}")
        return cfg

    def snapshot(self) -> dict[str, Any]:
        snap = asdict(self)
        snap["baseline"] = asdict(self.baseline)
        return snap

    def digest(self) -> str:
        canonical = json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def header(self, command: str) -> dict[str, Any]:
        return {"command": command, "config_digest": self.digest(), "seed": self.seed}

    def path(self, name: str, required: bool = True) -> Path | None:
        value = self.paths.get(name)
        if value is None:
            if required:
                raise ConfigError(f"config is missing required path {name!r}")
            return None
        p = Path(value)
        if not p.exists():
            raise ConfigError(f"configured path {name!r} does not exist: {p}")
        return p

    def make_counter(self) -> TokenCounter:
        if self.counter == "whitespace":
            return make_whitespace_counter()
        vocab = self.path("vocab")
        merges = self.path("merges")
        return make_bpe_counter(VocabSpec(str(vocab), str(merges)))

    def make_endpoint(self, parallelism: int | None = None) -> EndpointConfig:
        if not self.endpoint.get("base_url"):
            raise ConfigError("config is missing endpoint.base_url")
        settings = dict(self.endpoint)
        if parallelism is not None:
            settings["parallelism"] = parallelism
        try:
            return EndpointConfig(**settings)
        except TypeError as exc:
            raise ConfigError(f"bad endpoint settings: {exc}") from exc

    def make_preprocess(self) -> PreprocessConfig:
        stopwords_path = self.path("stopwords", required=False)
        if stopwords_path is not None:
            return PreprocessConfig(stopwords=load_stopwords(stopwords_path))
        return PreprocessConfig()


def _set_dotted(data: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {dotted!r}: {part!r} is not a table")
    node[parts[-1]] = value
