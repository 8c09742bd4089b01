"""Pipeline configuration: a TOML file plus ``key=value`` overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .extraction import TabuParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    corpus: str = ""
    planted: str | None = None  # PlantedSpec JSON; replaces the text stages
    corpus_format: str | None = None
    dictionary: str | None = None
    stopwords: str | None = None
    min_df: int = 1
    rank: int | None = None
    energy_fraction: float = 0.8
    rank_cap: int = 300
    threshold: float = 0.2
    chunk_size: int = 200
    merge_ratio: float = 0.85
    min_residual: int = 30
    restarts: int = 20
    tenure: int | None = None
    stall_limit: int | None = None
    max_moves: int | None = None
    seed: int = 0
    stability_runs: int = 0
    nmi_average: str = "arithmetic"
    output_dir: str = "textnet-out"

    @property
    def tabu(self) -> TabuParams:
        return TabuParams(self.tenure, self.stall_limit, self.max_moves)

    def validate(self) -> "PipelineConfig":
        errors = []

        def check(ok, name, msg):
            if not ok:
                errors.append(f"{name}: {msg} (got {getattr(self, name)!r})")

        check(bool(self.corpus) != bool(self.planted), "corpus", "set exactly one of corpus or planted")
        for name in ("corpus", "planted", "dictionary", "stopwords"):
            value = getattr(self, name)
            if value and not Path(value).is_file():
                errors.append(f"{name}: file not found: {value}")
        check(self.corpus_format in (None, "jsonl", "csv"), "corpus_format", "must be jsonl or csv")
        check(self.min_df >= 1, "min_df", "must be >= 1")
        check(self.rank is None or self.rank >= 1, "rank", "must be >= 1")
        check(0.0 < self.energy_fraction <= 1.0, "energy_fraction", "must lie in (0, 1]")
        check(self.rank_cap >= 1, "rank_cap", "must be >= 1")
        check(0.0 <= self.threshold < 1.0, "threshold", "must lie in [0, 1)")
        check(self.chunk_size >= 2, "chunk_size", "must be >= 2")
        check(0.0 < self.merge_ratio <= 1.0, "merge_ratio", "must lie in (0, 1]")
        check(self.min_residual >= 0, "min_residual", "must be >= 0")
        check(self.restarts >= 1, "restarts", "must be >= 1")
        for name in ("tenure", "stall_limit", "max_moves"):
            check(getattr(self, name) is None or getattr(self, name) >= 1, name, "must be >= 1")
        check(self.stability_runs >= 0, "stability_runs", "must be >= 0")
        check(self.nmi_average in ("arithmetic", "geometric", "min", "max"), "nmi_average",
              "must be arithmetic, geometric, min or max")
        if errors:
            raise ConfigError("; ".join(errors))
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self, keys=None) -> str:
        """Hash of the settings that influence results (optionally a subset)."""
        d = {k: v for k, v in self.to_dict().items() if k != "output_dir"}
        if keys is not None:
            d = {k: d[k] for k in keys}
        for k in ("corpus", "planted", "dictionary", "stopwords"):
            d.pop(k, None)  # files are tracked by content hash instead
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


_FIELDS = {f.name: f for f in fields(PipelineConfig)}
_PATH_KEYS = ("corpus", "planted", "dictionary", "stopwords", "output_dir")


def _coerce(name, value):
    f = _FIELDS.get(name)
    if f is None:
        raise ConfigError(f"{name}: unknown setting")
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    if value is None:
        if "None" not in kind:
            raise ConfigError(f"{name}: may not be empty")
        return None
    try:
        if kind.startswith("int"):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if kind.startswith("float"):
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected {kind}, got {value!r}") from None


def parse_override(item: str) -> tuple[str, object]:
    """``key=value`` where value is read as a TOML literal, falling back to a bare string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    key, raw = key.strip(), raw.strip()
    if raw.lower() in ("", "none", "null"):
        return key, None
    try:
        return key, tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return key, raw


def load_config(path: str | Path | None = None, overrides=(), seed: int | None = None) -> PipelineConfig:
    """Read a TOML config (flat, or under a ``[textnet]`` table) and apply overrides.

    Relative paths in the file resolve against the file's directory;
    relative paths in overrides resolve against the working directory.
    """
    values: dict = {}
    if path is not None:
        path = Path(path)
        try:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        raw = dict(raw.get("textnet", raw))
        raw.pop("sweep", None)
        for key, value in raw.items():
            value = _coerce(key, value)
            if key in _PATH_KEYS and value is not None and not Path(value).is_absolute():
                value = str((path.parent / value).resolve())
            values[key] = value
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        values[key] = _coerce(key, value)
    if seed is not None:
        values["seed"] = seed
    return PipelineConfig(**values).validate()


def load_sweep(path: str | Path) -> dict[str, list]:
    """The optional ``[sweep]`` table: setting name -> list of values."""
    raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    table = raw.get("sweep", raw.get("textnet", {}).get("sweep", {}))
    grid = {}
    for key, values in table.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{key}: expected a non-empty list")
        grid[key] = [_coerce(key, v) for v in values]
    return grid


def parse_grid(item: str) -> tuple[str, list]:
    """``key=v1,v2,...`` from the command line."""
    if "=" not in item:
        raise ConfigError(f"grid {item!r} is not key=v1,v2,...")
    key, raw = item.split("=", 1)
    key = key.strip()
    values = [parse_override(f"{key}={v}")[1] for v in raw.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"grid {key}: no values")
    return key, [_coerce(key, v) for v in values]


def dump_toml(cfg: PipelineConfig) -> str:
    lines = []
    for key, value in cfg.to_dict().items():
        if value is None:
            continue
        lines.append(f"{key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"
