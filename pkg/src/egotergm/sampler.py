"""Metropolis sampling of ERGM graph slices and planted synthetic populations.

``sample_ergm`` runs a single-dyad-toggle Metropolis chain: a uniformly chosen
dyad is proposed for flipping and accepted with probability
min(1, exp(theta . delta)) where delta is the change-statistic vector of the
proposed flip.  One sweep is C(n, 2) proposals.  Slices are independent
chains by default (exchangeable years); an optional persistence knob starts
each slice's chain from the previous slice instead.

``plant_population`` draws whole ego populations from per-cluster parameter
vectors and returns them with ground-truth labels; ``population_records``
exports such populations through the same dyad-year schema as real data,
adding a hub tie from each ego to every alter so ingestion recovers the
planted ego-networks.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .changestats import (
    DEGREE_TERM_KINDS,
    ModelSpec,
    TermSpec,
    change_stat_matrix,
    degree_contribution,
)
from .errors import ConfigError, EstimationError
from .netdata import (
    COMMITMENT_FLAGS,
    DYAD_FLAG_NAMES,
    NODE_ATTR_NAMES,
    DyadYearRecord,
    EgoSeries,
    GraphSlice,
    NodeYearAttrs,
    PeriodDef,
)
from .rng import child_rng, child_seed

__all__ = [
    "SamplerConfig",
    "sample_ergm",
    "plant_population",
    "population_records",
]

_TRIANGLE_CODE = 4
_DEGREE_CODES = {"kstar": 1, "alt_kstar": 2, "gw_degree": 3}

_DIST_ARITY = {"bernoulli": 1, "uniform": 2, "constant": 1}


def _check_draw(name: str, spec_: Sequence) -> None:
    if not spec_ or spec_[0] not in _DIST_ARITY:
        raise ConfigError(
            f"attribute generator for {name!r} must start with one of "
            f"{sorted(_DIST_ARITY)}, got {spec_!r}"
        )
    if len(spec_) - 1 != _DIST_ARITY[spec_[0]]:
        raise ConfigError(
            f"attribute generator {spec_!r} for {name!r} has the wrong arity"
        )


@dataclass(frozen=True)
class SamplerConfig:
    """Everything needed to draw annual graph slices from one ERGM.

    Node and dyad attributes are drawn once per population and reused across
    slices: either fixed per-node tables (``node_attr_values``) or independent
    draws described as ("bernoulli", p), ("uniform", lo, hi) or
    ("constant", v).
    """

    n_nodes: int
    spec: ModelSpec
    theta: tuple[float, ...]
    burnin: int = 20
    thin: int = 5
    slices: int = 1
    seed: int = 0
    start_year: int = 1
    node_attr_values: Mapping[str, Sequence[float]] | None = None
    node_attr_draws: Mapping[str, Sequence] | None = None
    dyad_attr_draws: Mapping[str, Sequence] | None = None
    persistent: bool = False

    def __post_init__(self) -> None:
        if self.n_nodes < 2:
            raise ConfigError(f"need at least 2 nodes, got {self.n_nodes}")
        if len(self.theta) != self.spec.n_terms:
            raise ConfigError(
                f"theta has {len(self.theta)} entries for {self.spec.n_terms} terms"
            )
        if self.burnin < 1 or self.thin < 1:
            raise ConfigError("burnin and thin must both be >= 1")
        if self.slices < 1:
            raise ConfigError(f"need at least one slice, got {self.slices}")
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        for table in (self.node_attr_draws or {}).items():
            _check_draw(*table)
        for table in (self.dyad_attr_draws or {}).items():
            _check_draw(*table)
        for name, vals in (self.node_attr_values or {}).items():
            if len(vals) != self.n_nodes:
                raise ConfigError(
                    f"fixed attribute table {name!r} has {len(vals)} values "
                    f"for {self.n_nodes} nodes"
                )


@njit(cache=True)
def _chain_kernel(adj, deg, base, codes, theta_s, tabs, pi, pj, u):  # pragma: no cover
    """Run one segment of the toggle chain in place; -1 on success, else the
    index of the structural term whose contribution went non-finite."""
    n = adj.shape[0]
    for t in range(pi.shape[0]):
        i = pi[t]
        j = pj[t]
        present = adj[i, j]
        di = deg[i] - present
        dj = deg[j] - present
        logr = base[i, j]
        for s in range(codes.shape[0]):
            if codes[s] == 4:
                cn = 0
                for k in range(n):
                    cn += adj[i, k] * adj[j, k]
                d = float(cn)
            else:
                d = tabs[s, di] + tabs[s, dj]
            contrib = theta_s[s] * d
            if not np.isfinite(contrib):
                return s
            logr += contrib
        if present == 1:
            logr = -logr
        if logr >= 0.0 or u[t] < np.exp(logr):
            newv = 1 - present
            adj[i, j] = newv
            adj[j, i] = newv
            if newv == 1:
                deg[i] += 1
                deg[j] += 1
            else:
                deg[i] -= 1
                deg[j] -= 1
    return -1


def _draw_value(rng: np.random.Generator, dist: Sequence, size) -> np.ndarray:
    kind = dist[0]
    if kind == "bernoulli":
        return (rng.random(size) < float(dist[1])).astype(float)
    if kind == "uniform":
        return rng.uniform(float(dist[1]), float(dist[2]), size)
    return np.full(size, float(dist[1]))


def _draw_attrs(cfg: SamplerConfig, rng: np.random.Generator):
    n = cfg.n_nodes
    node_attrs: dict[str, np.ndarray] = {}
    for name, vals in sorted((cfg.node_attr_values or {}).items()):
        node_attrs[name] = np.asarray(vals, dtype=float)
    for name, dist in sorted((cfg.node_attr_draws or {}).items()):
        if name in node_attrs:
            raise ConfigError(f"attribute {name!r} is both fixed and drawn")
        node_attrs[name] = _draw_value(rng, dist, n)
    dyad_attrs: dict[str, np.ndarray] = {}
    for name, dist in sorted((cfg.dyad_attr_draws or {}).items()):
        mat = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        vals = _draw_value(rng, dist, iu[0].shape[0])
        mat[iu] = vals
        mat = mat + mat.T
        dyad_attrs[name] = mat
    return node_attrs, dyad_attrs


def _node_names(n: int) -> tuple[str, ...]:
    return tuple(f"a{k:03d}" for k in range(n))


def sample_ergm(cfg: SamplerConfig) -> list[GraphSlice]:
    """Draw ``cfg.slices`` annual graph slices from the configured model."""
    n = cfg.n_nodes
    names = _node_names(n)
    attr_rng = child_rng(cfg.seed, 90001)
    node_attrs, dyad_attrs = _draw_attrs(cfg, attr_rng)

    template = GraphSlice(
        year=cfg.start_year,
        nodes=names,
        adj=np.zeros((n, n), dtype=np.int8),
        node_attrs=node_attrs,
        dyad_attrs=dyad_attrs,
    )
    base = np.zeros((n, n))
    codes: list[int] = []
    theta_s: list[float] = []
    tabs_rows: list[np.ndarray] = []
    for term, th in zip(cfg.spec.terms, cfg.theta):
        if term.dyad_independent:
            with np.errstate(invalid="ignore"):
                contrib = th * change_stat_matrix(term, template)
            if not np.isfinite(contrib).all():
                raise EstimationError(
                    f"term {term.label!r} yields a non-finite acceptance exponent"
                )
            base += contrib
        elif term.kind in DEGREE_TERM_KINDS:
            codes.append(_DEGREE_CODES[term.kind])
            theta_s.append(th)
            tab = degree_contribution(term, n - 1)
            if not np.isfinite(tab).all():
                raise EstimationError(
                    f"term {term.label!r} yields a non-finite acceptance exponent"
                )
            tabs_rows.append(tab)
        elif term.kind == "triangles":
            codes.append(_TRIANGLE_CODE)
            theta_s.append(th)
            tabs_rows.append(np.zeros(n))
        else:  # pragma: no cover - all kinds are classified above
            raise ConfigError(f"sampler cannot handle term kind {term.kind!r}")
    struct_labels = [
        t.label for t in cfg.spec.terms
        if not t.dyad_independent
    ]
    codes_arr = np.asarray(codes, dtype=np.int64)
    theta_arr = np.asarray(theta_s, dtype=float)
    tabs = np.vstack(tabs_rows) if tabs_rows else np.zeros((0, n))

    iu = np.triu_indices(n, k=1)
    all_i = iu[0].astype(np.int64)
    all_j = iu[1].astype(np.int64)
    n_dyads = all_i.shape[0]

    def run_segment(adj, deg, rng, sweeps: int) -> None:
        proposals = sweeps * n_dyads
        flat = rng.integers(0, n_dyads, size=proposals)
        u = rng.random(proposals)
        status = _chain_kernel(adj, deg, base, codes_arr, theta_arr, tabs,
                               all_i[flat], all_j[flat], u)
        if status >= 0:
            raise EstimationError(
                f"term {struct_labels[status]!r} yields a non-finite acceptance exponent"
            )

    out: list[GraphSlice] = []
    if cfg.persistent:
        rng = child_rng(cfg.seed, 90002)
        adj = np.zeros((n, n), dtype=np.int8)
        deg = np.zeros(n, dtype=np.int64)
        for s in range(cfg.slices):
            run_segment(adj, deg, rng, cfg.burnin if s == 0 else cfg.thin)
            out.append(replace(template, year=cfg.start_year + s, adj=adj.copy()))
    else:
        for s in range(cfg.slices):
            rng = child_rng(cfg.seed, 90002, s)
            adj = np.zeros((n, n), dtype=np.int8)
            deg = np.zeros(n, dtype=np.int64)
            run_segment(adj, deg, rng, cfg.burnin)
            out.append(replace(template, year=cfg.start_year + s, adj=adj))
    return out


def plant_population(
    G: int,
    thetas: Sequence[Sequence[float]],
    egos_per_cluster: int,
    template: SamplerConfig,
) -> tuple[list[EgoSeries], np.ndarray]:
    """Sample ``G * egos_per_cluster`` ego series with known cluster labels.

    Ego k of cluster g is drawn from the template with ``thetas[g]`` and a
    deterministic child seed, so populations are reproducible ego by ego.
    """
    if len(thetas) != G:
        raise ConfigError(f"expected {G} theta vectors, got {len(thetas)}")
    if egos_per_cluster < 1:
        raise ConfigError("need at least one ego per cluster")
    period = PeriodDef(
        "synthetic", template.start_year, template.start_year + template.slices - 1
    )
    egos: list[EgoSeries] = []
    labels: list[int] = []
    idx = 0
    for g in range(G):
        theta = tuple(float(t) for t in thetas[g])
        for _ in range(egos_per_cluster):
            ego_id = f"ego{idx:03d}"
            cfg = replace(template, theta=theta,
                          seed=child_seed(template.seed, 7100, g, idx))
            slices = sample_ergm(cfg)
            mapping = {v: f"{ego_id}_{v}" for v in slices[0].nodes}
            egos.append(EgoSeries.from_slices(
                ego_id, period, [s.relabeled(mapping) for s in slices]
            ))
            labels.append(g)
            idx += 1
    return egos, np.asarray(labels, dtype=np.int64)


def population_records(
    egos: Sequence[EgoSeries],
) -> tuple[list[DyadYearRecord], list[NodeYearAttrs]]:
    """Export planted populations through the dyad-year schema.

    Each ego becomes a hub actor tied to every alter in every year, so that
    ingesting the records and extracting egos with min_alters = n_nodes
    recovers exactly the planted alter graphs.  Commitment flags come from
    drawn dyad attributes where present; ties with no drawn commitment get a
    default defensive flag.  alliance_years is emitted already recomputed.
    """
    dyad_rows: list[DyadYearRecord] = []
    node_rows: list[NodeYearAttrs] = []
    for ego in egos:
        runs: dict[tuple[str, str], int] = {}
        prev_years: dict[tuple[str, str], int] = {}
        drawn_flags = [
            f for f in DYAD_FLAG_NAMES if f in ego.slice(ego.years[0]).dyad_attrs
        ]
        default_flag = next(
            (f for f in COMMITMENT_FLAGS if f not in drawn_flags), None
        )
        for year in ego.years:
            g = ego.slice(year)
            node_rows.append(NodeYearAttrs(
                actor_id=ego.ego_id, year=year,
                regime_democracy=False, cinc=0.0, revisionist=False,
            ))
            for k, alter in enumerate(g.nodes):
                attrs = {}
                for name in NODE_ATTR_NAMES:
                    if name in g.node_attrs:
                        attrs[name] = g.node_attrs[name][k]
                node_rows.append(NodeYearAttrs(
                    actor_id=alter, year=year,
                    regime_democracy=bool(attrs.get("regime_democracy", 0.0)),
                    cinc=float(attrs.get("cinc", 0.0)),
                    revisionist=bool(attrs.get("revisionist", 0.0)),
                ))
            ties = [(ego.ego_id, alter) for alter in g.nodes]
            iu = np.triu_indices(g.n_nodes, k=1)
            ties += [
                (g.nodes[a], g.nodes[b])
                for a, b in zip(iu[0], iu[1])
                if g.adj[a, b]
            ]
            index = {v: k for k, v in enumerate(g.nodes)}
            for a, b in ties:
                key = (a, b) if a < b else (b, a)
                run = runs.get(key, -1) + 1 if prev_years.get(key) == year - 1 else 0
                runs[key] = run
                prev_years[key] = year
                flags = {f: False for f in DYAD_FLAG_NAMES}
                inst = 0.0
                if a in index and b in index:
                    ia, ib = index[a], index[b]
                    for f in drawn_flags:
                        flags[f] = bool(round(g.dyad_attrs[f][ia, ib]))
                    if "institutionalization" in g.dyad_attrs:
                        inst = float(g.dyad_attrs["institutionalization"][ia, ib])
                if not any(flags[f] for f in COMMITMENT_FLAGS):
                    if default_flag is None:
                        raise ConfigError(
                            "all commitment flags are drawn and none is set for "
                            f"tie {key} in {year}; cannot export a valid record"
                        )
                    flags[default_flag] = True
                dyad_rows.append(DyadYearRecord(
                    actor_a=key[0], actor_b=key[1], year=year,
                    defensive=flags["defensive"], offensive=flags["offensive"],
                    neutrality=flags["neutrality"],
                    nonaggression=flags["nonaggression"], secret=flags["secret"],
                    institutionalization=inst, alliance_years=run,
                ))
    dyad_rows.sort(key=lambda r: (r.year, r.actor_a, r.actor_b))
    node_rows.sort(key=lambda r: (r.actor_id, r.year))
    return dyad_rows, node_rows
