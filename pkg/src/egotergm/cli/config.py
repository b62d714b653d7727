"""Run and simulation configuration files.

Configurations are YAML documents.  Relative paths inside a configuration
resolve against the current working directory.  Model terms use the compact
grammar of ``changestats.parse_term`` (``edges``, ``alt_kstar(0.5)``,
``node_match(regime_democracy)``, ...), either as plain strings or as
``{term: ..., label: ...}`` mappings when a display label is wanted.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import yaml

from ..changestats import (
    DYAD_ATTR_KINDS,
    NODE_ATTR_KINDS,
    ModelSpec,
    TermSpec,
    parse_term,
)
from ..errors import ConfigError
from ..netdata import DYAD_ATTR_NAMES, NODE_ATTR_NAMES, PeriodDef
from ..sampler import SamplerConfig

__all__ = [
    "PeriodConfig",
    "PooledConfig",
    "RoleGroup",
    "RunConfig",
    "SimulateConfig",
    "load_run_config",
    "load_simulate_config",
    "config_hash",
    "slugify",
]

DEFAULT_MIN_ALTERS = 5
DEFAULT_REPLICATIONS = 500
DEFAULT_CONFIDENCE = 0.95
DEFAULT_ROLE_CAP = 4


def slugify(name: str) -> str:
    """File-name-safe version of a period or role label."""
    out = "".join(c.lower() if c.isalnum() else "_" for c in name)
    while "__" in out:
        out = out.replace("__", "_")
    return out.strip("_") or "unnamed"


def config_hash(path: str | Path) -> str:
    """sha256 of the raw configuration bytes, for run manifests."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class PeriodConfig:
    period: PeriodDef
    spec: ModelSpec
    g_range: tuple[int, int]
    g_cap: int


@dataclass(frozen=True)
class RoleGroup:
    label: str
    members: tuple[tuple[str, int], ...]  # (period name, role index)


@dataclass(frozen=True)
class PooledConfig:
    spec: ModelSpec
    mode: str  # "per_period" or "role_map"
    role_map: tuple[RoleGroup, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    dyad_csv: str
    node_csv: str
    span: tuple[int, int]
    min_alters: int
    seed: int
    replications: int
    confidence: float
    output: str
    periods: tuple[PeriodConfig, ...]
    pooled: PooledConfig | None


@dataclass(frozen=True)
class SimulateConfig:
    template: SamplerConfig
    thetas: tuple[tuple[float, ...], ...]
    egos_per_cluster: int
    output: str


# ---------------------------------------------------------------------------
# helpers


def _fail(path: Path, msg: str) -> ConfigError:
    return ConfigError(f"{path}: {msg}")


def _load_yaml(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file {path} does not exist")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: not valid YAML: {err}") from None
    if not isinstance(doc, dict):
        raise _fail(path, "top level must be a mapping")
    return doc


def _get(doc: dict, key: str, path: Path, kind: type, default=None, required: bool = False):
    if key not in doc:
        if required:
            raise _fail(path, f"missing required key {key!r}")
        return default
    val = doc[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool) and kind is int:
        raise _fail(path, f"key {key!r} must be {kind.__name__}, got {type(val).__name__}")
    return val


def _parse_span(doc: dict, path: Path, key: str = "span") -> tuple[int, int]:
    raw = _get(doc, key, path, list, required=True)
    if len(raw) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw):
        raise _fail(path, f"{key!r} must be a pair of integer years, got {raw!r}")
    if raw[0] > raw[1]:
        raise _fail(path, f"{key!r} start {raw[0]} is after end {raw[1]}")
    return (raw[0], raw[1])


def _parse_term_entry(entry, path: Path) -> TermSpec:
    if isinstance(entry, str):
        return parse_term(entry)
    if isinstance(entry, dict):
        unknown = set(entry) - {"term", "label"}
        if unknown or "term" not in entry:
            raise _fail(path, f"term entry {entry!r} needs a 'term' key (and optional 'label')")
        return parse_term(str(entry["term"]), label=str(entry.get("label", "")))
    raise _fail(path, f"term entry {entry!r} must be a string or a mapping")


def _parse_spec(entries, path: Path, context: str) -> ModelSpec:
    if not isinstance(entries, list) or not entries:
        raise _fail(path, f"{context}: 'terms' must be a non-empty list")
    terms = tuple(_parse_term_entry(e, path) for e in entries)
    for t in terms:
        if t.kind in NODE_ATTR_KINDS and t.attr not in NODE_ATTR_NAMES:
            raise _fail(
                path,
                f"{context}: term {t.label!r} references node attribute {t.attr!r}; "
                f"known attributes are {NODE_ATTR_NAMES}",
            )
        if t.kind in DYAD_ATTR_KINDS and t.attr not in DYAD_ATTR_NAMES:
            raise _fail(
                path,
                f"{context}: term {t.label!r} references dyad attribute {t.attr!r}; "
                f"known attributes are {DYAD_ATTR_NAMES}",
            )
    return ModelSpec(terms=terms)


# ---------------------------------------------------------------------------
# run configuration


def load_run_config(path: str | Path) -> RunConfig:
    """Load and validate a pipeline run configuration."""
    path = Path(path)
    doc = _load_yaml(path)
    data = _get(doc, "data", path, dict, required=True)
    for key in ("dyads", "nodes"):
        if key not in data or not isinstance(data[key], str):
            raise _fail(path, f"data.{key} must be a file path")
    span = _parse_span(doc, path)
    min_alters = _get(doc, "min_alters", path, int, default=DEFAULT_MIN_ALTERS)
    if min_alters < 1:
        raise _fail(path, f"min_alters must be >= 1, got {min_alters}")
    seed = _get(doc, "seed", path, int, default=0)
    boot = _get(doc, "bootstrap", path, dict, default={})
    replications = _get(boot, "replications", path, int, default=DEFAULT_REPLICATIONS)
    confidence = _get(boot, "confidence", path, float, default=DEFAULT_CONFIDENCE)
    if replications < 1:
        raise _fail(path, f"bootstrap.replications must be >= 1, got {replications}")
    if not 0.0 < confidence < 1.0:
        raise _fail(path, f"bootstrap.confidence must lie in (0, 1), got {confidence}")
    output = _get(doc, "output", path, str, default="out")

    raw_periods = _get(doc, "periods", path, list, required=True)
    periods: list[PeriodConfig] = []
    for k, praw in enumerate(raw_periods):
        if not isinstance(praw, dict):
            raise _fail(path, f"periods[{k}] must be a mapping")
        name = _get(praw, "name", path, str, required=True)
        start = _get(praw, "start", path, int, required=True)
        end = _get(praw, "end", path, int, required=True)
        if start > end:
            raise _fail(path, f"period {name!r} has start {start} after end {end}")
        if not (span[0] <= start and end <= span[1]):
            raise _fail(path, f"period {name!r} ({start}-{end}) falls outside span {span}")
        spec = _parse_spec(praw.get("terms"), path, f"period {name!r}")
        g_cap = _get(praw, "g_cap", path, int, default=DEFAULT_ROLE_CAP)
        if g_cap < 1:
            raise _fail(path, f"period {name!r}: g_cap must be >= 1")
        g_range_raw = praw.get("g_range", [1, g_cap])
        if (not isinstance(g_range_raw, list) or len(g_range_raw) != 2
                or not all(isinstance(v, int) for v in g_range_raw)):
            raise _fail(path, f"period {name!r}: g_range must be [lo, hi]")
        lo, hi = g_range_raw
        if not 1 <= lo <= hi:
            raise _fail(path, f"period {name!r}: invalid g_range {g_range_raw}")
        periods.append(PeriodConfig(
            period=PeriodDef(name, start, end),
            spec=spec,
            g_range=(lo, hi),
            g_cap=g_cap,
        ))
    if not periods:
        raise _fail(path, "at least one period is required")
    names = [p.period.name for p in periods]
    if len(set(names)) != len(names):
        raise _fail(path, f"duplicate period names: {names}")
    ordered = sorted(periods, key=lambda p: p.period.start_year)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.period.start_year <= prev.period.end_year:
            raise _fail(
                path,
                f"periods {prev.period.name!r} and {cur.period.name!r} overlap",
            )
    if [p.period.name for p in ordered] != names:
        raise _fail(path, "periods must be listed in chronological order")

    pooled = None
    if "pooled" in doc:
        praw = _get(doc, "pooled", path, dict, required=True)
        spec = _parse_spec(praw.get("terms"), path, "pooled model")
        mode = _get(praw, "mode", path, str, default="per_period")
        if mode not in ("per_period", "role_map"):
            raise _fail(path, f"pooled.mode must be per_period or role_map, got {mode!r}")
        role_map: list[RoleGroup] = []
        if mode == "role_map":
            raw_map = praw.get("role_map")
            if not isinstance(raw_map, list) or not raw_map:
                raise _fail(path, "pooled.role_map must be a non-empty list in role_map mode")
            for entry in raw_map:
                if not isinstance(entry, dict) or "label" not in entry:
                    raise _fail(path, f"role_map entry {entry!r} needs a label")
                members_raw = entry.get("members")
                if not isinstance(members_raw, list) or not members_raw:
                    raise _fail(path, f"role_map entry {entry['label']!r} needs members")
                members = []
                for mem in members_raw:
                    if (not isinstance(mem, dict) or "period" not in mem
                            or "role" not in mem or not isinstance(mem["role"], int)):
                        raise _fail(
                            path,
                            f"role_map member {mem!r} needs 'period' and integer 'role'",
                        )
                    if mem["period"] not in names:
                        raise _fail(
                            path,
                            f"role_map references unknown period {mem['period']!r}",
                        )
                    members.append((str(mem["period"]), mem["role"]))
                role_map.append(RoleGroup(label=str(entry["label"]), members=tuple(members)))
            labels = [g.label for g in role_map]
            if len(set(labels)) != len(labels):
                raise _fail(path, f"duplicate role_map labels: {labels}")
        pooled = PooledConfig(spec=spec, mode=mode, role_map=tuple(role_map))

    return RunConfig(
        dyad_csv=str(data["dyads"]),
        node_csv=str(data["nodes"]),
        span=span,
        min_alters=min_alters,
        seed=seed,
        replications=replications,
        confidence=confidence,
        output=output,
        periods=tuple(periods),
        pooled=pooled,
    )


# ---------------------------------------------------------------------------
# simulation configuration


def _parse_draws(doc: dict, key: str, path: Path) -> dict | None:
    raw = doc.get(key)
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise _fail(path, f"{key} must be a mapping of attribute name to generator")
    out = {}
    for name, dist in raw.items():
        if not isinstance(dist, list) or not dist:
            raise _fail(path, f"{key}.{name} must be a list like [bernoulli, 0.5]")
        out[str(name)] = tuple(dist)
    return out


def load_simulate_config(path: str | Path) -> SimulateConfig:
    """Load and validate a synthetic-population configuration."""
    path = Path(path)
    doc = _load_yaml(path)
    spec = _parse_spec(doc.get("terms"), path, "simulation model")
    raw_thetas = _get(doc, "thetas", path, list, required=True)
    thetas: list[tuple[float, ...]] = []
    for k, row in enumerate(raw_thetas):
        if not isinstance(row, list) or len(row) != spec.n_terms:
            raise _fail(
                path,
                f"thetas[{k}] must list {spec.n_terms} coefficients (one per term)",
            )
        try:
            thetas.append(tuple(float(v) for v in row))
        except (TypeError, ValueError):
            raise _fail(path, f"thetas[{k}] contains a non-numeric entry: {row!r}") from None
    if not thetas:
        raise _fail(path, "thetas must list at least one cluster")
    egos_per_cluster = _get(doc, "egos_per_cluster", path, int, required=True)
    node_values = doc.get("node_attr_values")
    if node_values is not None and not isinstance(node_values, dict):
        raise _fail(path, "node_attr_values must be a mapping")
    node_draws = _parse_draws(doc, "node_attr_draws", path)
    dyad_draws = _parse_draws(doc, "dyad_attr_draws", path)
    for t in spec.terms:
        if t.kind in NODE_ATTR_KINDS:
            known = set(node_values or ()) | set(node_draws or ())
            if t.attr not in known:
                raise _fail(
                    path,
                    f"term {t.label!r} needs a generator for node attribute {t.attr!r}",
                )
        if t.kind in DYAD_ATTR_KINDS and t.attr not in (dyad_draws or ()):
            raise _fail(
                path,
                f"term {t.label!r} needs a generator for dyad attribute {t.attr!r}",
            )
    try:
        template = SamplerConfig(
            n_nodes=_get(doc, "n_nodes", path, int, required=True),
            spec=spec,
            theta=thetas[0],
            burnin=_get(doc, "burnin", path, int, default=20),
            thin=_get(doc, "thin", path, int, default=5),
            slices=_get(doc, "slices", path, int, required=True),
            seed=_get(doc, "seed", path, int, default=0),
            start_year=_get(doc, "start_year", path, int, default=1),
            node_attr_values=node_values,
            node_attr_draws=node_draws,
            dyad_attr_draws=dyad_draws,
            persistent=bool(doc.get("persistent", False)),
        )
    except ConfigError as err:
        raise _fail(path, str(err)) from None
    return SimulateConfig(
        template=template,
        thetas=tuple(thetas),
        egos_per_cluster=egos_per_cluster,
        output=_get(doc, "output", path, str, default="sim"),
    )
