"""Network statistics and dyadic change statistics for TERGM pseudolikelihood designs.

All graphs are undirected and binary.  With d_i the degree of node i and E the
edge set, the global statistics are

  Edges            S = |E|
  KStar(k)         S = sum_i C(d_i, k)                                   (k >= 2)
  AltKStar(lam)    S = lam^2 * sum_i [ (1 - 1/lam)^d_i - 1 + d_i/lam ]   (lam > 0)
                     = sum_{k>=2} (-1)^k S_k / lam^(k-2)  with S_k the k-star count
  GWDegree(a)      S = e^a * sum_i [ 1 - (1 - e^-a)^d_i ]                (a > 0)
  Triangles        S = number of closed node triples
  NodeMatch(x)     S = sum_{(i,j) in E} 1[x_i == x_j]
  AbsDiff(x)       S = sum_{(i,j) in E} |x_i - x_j|
  EdgeCov(a)       S = sum_{(i,j) in E} a_ij    (a_ij = 0 where no record exists)

The change statistic of a dyad (i, j) is S(graph with the tie) minus S(graph
without the tie), holding every other dyad fixed; the tie itself is toggled
off before evaluating degree-based terms (the "toggled-off baseline").
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, MissingAttributeError
from .netdata import GraphSlice

__all__ = [
    "TermSpec",
    "ModelSpec",
    "DesignMatrix",
    "edges",
    "kstar",
    "alt_kstar",
    "gw_degree",
    "triangles",
    "node_match",
    "abs_diff",
    "edge_cov",
    "parse_term",
    "global_stat",
    "change_stat",
    "change_stat_matrix",
    "design_matrix",
]

KINDS = ("edges", "kstar", "alt_kstar", "gw_degree", "triangles",
         "node_match", "abs_diff", "edge_cov")
NODE_ATTR_KINDS = ("node_match", "abs_diff")
DYAD_ATTR_KINDS = ("edge_cov",)
# terms whose change statistic does not depend on the rest of the adjacency
DYAD_INDEPENDENT_KINDS = ("edges", "node_match", "abs_diff", "edge_cov")
# degree-census terms whose change statistic is f(d_i) + f(d_j)
DEGREE_TERM_KINDS = ("kstar", "alt_kstar", "gw_degree")


@dataclass(frozen=True)
class TermSpec:
    """One model term: a kind plus its parameter or attribute name."""

    kind: str
    param: float | None = None
    attr: str | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown term kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "kstar":
            if self.param is None or int(self.param) != self.param or self.param < 2:
                raise ConfigError(f"kstar requires an integer order k >= 2, got {self.param!r}")
        elif self.kind in ("alt_kstar", "gw_degree"):
            if self.param is None or self.param <= 0:
                raise ConfigError(f"{self.kind} requires a decay parameter > 0, got {self.param!r}")
        elif self.param is not None:
            raise ConfigError(f"{self.kind} takes no numeric parameter")
        if self.kind in NODE_ATTR_KINDS + DYAD_ATTR_KINDS:
            if not self.attr:
                raise ConfigError(f"{self.kind} requires an attribute name")
        elif self.attr is not None:
            raise ConfigError(f"{self.kind} takes no attribute")
        if not self.label:
            object.__setattr__(self, "label", self.default_label())

    def default_label(self) -> str:
        if self.kind == "kstar":
            return f"kstar({int(self.param)})"
        if self.kind in ("alt_kstar", "gw_degree"):
            return f"{self.kind}({self.param:g})"
        if self.attr is not None:
            return f"{self.kind}({self.attr})"
        return self.kind

    @property
    def dyad_independent(self) -> bool:
        return self.kind in DYAD_INDEPENDENT_KINDS


def edges(label: str = "") -> TermSpec:
    return TermSpec("edges", label=label)


def kstar(k: int, label: str = "") -> TermSpec:
    return TermSpec("kstar", param=float(k), label=label)


def alt_kstar(decay: float, label: str = "") -> TermSpec:
    return TermSpec("alt_kstar", param=float(decay), label=label)


def gw_degree(decay: float, label: str = "") -> TermSpec:
    return TermSpec("gw_degree", param=float(decay), label=label)


def triangles(label: str = "") -> TermSpec:
    return TermSpec("triangles", label=label)


def node_match(attr: str, label: str = "") -> TermSpec:
    return TermSpec("node_match", attr=attr, label=label)


def abs_diff(attr: str, label: str = "") -> TermSpec:
    return TermSpec("abs_diff", attr=attr, label=label)


def edge_cov(attr: str, label: str = "") -> TermSpec:
    return TermSpec("edge_cov", attr=attr, label=label)


_TERM_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*([^()]*?)\s*\))?\s*$")


def parse_term(text: str, label: str = "") -> TermSpec:
    """Parse the compact term grammar: ``name`` or ``name(arg)``.

    The argument is numeric for kstar/alt_kstar/gw_degree and an attribute
    name for node_match/abs_diff/edge_cov.
    """
    m = _TERM_RE.match(text)
    if not m:
        raise ConfigError(f"cannot parse term {text!r}")
    name, arg = m.group(1), m.group(2)
    if name not in KINDS:
        raise ConfigError(f"unknown term kind {name!r} in {text!r}")
    if name in ("edges", "triangles"):
        if arg:
            raise ConfigError(f"{name} takes no argument (got {text!r})")
        return TermSpec(name, label=label)
    if arg is None or arg == "":
        raise ConfigError(f"term {name} requires an argument (got {text!r})")
    if name in DEGREE_TERM_KINDS:
        try:
            value = float(arg)
        except ValueError:
            raise ConfigError(f"term {name} requires a numeric argument (got {text!r})") from None
        return TermSpec(name, param=value, label=label)
    return TermSpec(name, attr=arg, label=label)


@dataclass(frozen=True)
class ModelSpec:
    """An ordered collection of terms with unique labels."""

    terms: tuple[TermSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ConfigError("a model needs at least one term")
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate term labels in model: {labels}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.terms)

    @property
    def n_terms(self) -> int:
        return len(self.terms)


# ---------------------------------------------------------------------------
# attribute lookup


def _node_attr(g: GraphSlice, term: TermSpec) -> np.ndarray:
    try:
        return np.asarray(g.node_attrs[term.attr], dtype=float)
    except KeyError:
        raise MissingAttributeError(
            f"term {term.label!r}: node attribute {term.attr!r} missing from slice "
            f"for year {g.year}"
        ) from None


def _dyad_attr(g: GraphSlice, term: TermSpec) -> np.ndarray:
    try:
        return np.asarray(g.dyad_attrs[term.attr], dtype=float)
    except KeyError:
        raise MissingAttributeError(
            f"term {term.label!r}: dyad attribute {term.attr!r} missing from slice "
            f"for year {g.year}"
        ) from None


# ---------------------------------------------------------------------------
# degree-census helpers

def degree_contribution(term: TermSpec, max_degree: int) -> np.ndarray:
    """Per-endpoint change contribution f(d) for degree-census terms.

    Adding a tie at an endpoint whose toggled-off degree is d changes the
    statistic by f(d); the full change statistic is f(d_i) + f(d_j).
    Returns the table [f(0), ..., f(max_degree)].
    """
    d = np.arange(max_degree + 1, dtype=float)
    if term.kind == "kstar":
        k = int(term.param)
        return np.array([float(math.comb(int(v), k - 1)) for v in range(max_degree + 1)])
    if term.kind == "alt_kstar":
        lam = float(term.param)
        r = 1.0 - 1.0 / lam
        return lam * (1.0 - r ** d)
    if term.kind == "gw_degree":
        s = 1.0 - math.exp(-float(term.param))
        return s ** d
    raise ValueError(f"{term.kind} is not a degree-census term")


# ---------------------------------------------------------------------------
# global statistics


def global_stat(term: TermSpec, g: GraphSlice) -> float:
    """Evaluate one statistic on an annual slice."""
    adj = g.adj
    n = g.n_nodes
    if n == 0:
        return 0.0
    deg = g.degrees()
    if term.kind == "edges":
        return float(adj.sum()) / 2.0
    if term.kind == "kstar":
        k = int(term.param)
        return float(sum(math.comb(int(d), k) for d in deg))
    if term.kind == "alt_kstar":
        lam = float(term.param)
        r = 1.0 - 1.0 / lam
        return float(lam * lam * np.sum(r ** deg.astype(float) - 1.0 + deg / lam))
    if term.kind == "gw_degree":
        a = float(term.param)
        s = 1.0 - math.exp(-a)
        return float(math.exp(a) * np.sum(1.0 - s ** deg.astype(float)))
    if term.kind == "triangles":
        a64 = adj.astype(np.int64)
        return float(np.trace(a64 @ a64 @ a64) // 6)
    if term.kind == "node_match":
        x = _node_attr(g, term)
        match = (x[:, None] == x[None, :]).astype(float)
        return float((match * adj).sum()) / 2.0
    if term.kind == "abs_diff":
        x = _node_attr(g, term)
        diff = np.abs(x[:, None] - x[None, :])
        return float((diff * adj).sum()) / 2.0
    if term.kind == "edge_cov":
        cov = _dyad_attr(g, term)
        return float((cov * adj).sum()) / 2.0
    raise ValueError(f"unhandled term kind {term.kind!r}")


# ---------------------------------------------------------------------------
# change statistics


def change_stat(term: TermSpec, g: GraphSlice, i: int, j: int) -> float:
    """Change statistic of dyad (i, j), with the tie toggled off as baseline."""
    n = g.n_nodes
    if i == j:
        raise DataError(f"change statistic undefined for self-dyad ({i}, {j})")
    if not (0 <= i < n and 0 <= j < n):
        raise DataError(f"dyad ({i}, {j}) outside slice with {n} nodes")
    adj = g.adj
    present = int(adj[i, j])
    if term.kind == "edges":
        return 1.0
    if term.kind in DEGREE_TERM_KINDS:
        deg = g.degrees()
        di = int(deg[i]) - present
        dj = int(deg[j]) - present
        tab = degree_contribution(term, max(di, dj))
        return float(tab[di] + tab[dj])
    if term.kind == "triangles":
        return float(np.dot(adj[i].astype(np.int64), adj[j].astype(np.int64)))
    if term.kind == "node_match":
        x = _node_attr(g, term)
        return float(x[i] == x[j])
    if term.kind == "abs_diff":
        x = _node_attr(g, term)
        return float(abs(x[i] - x[j]))
    if term.kind == "edge_cov":
        cov = _dyad_attr(g, term)
        return float(cov[i, j])
    raise ValueError(f"unhandled term kind {term.kind!r}")


def change_stat_matrix(term: TermSpec, g: GraphSlice) -> np.ndarray:
    """Change statistics for every dyad at once (symmetric, zero diagonal)."""
    n = g.n_nodes
    adj = g.adj
    out: np.ndarray
    if term.kind == "edges":
        out = np.ones((n, n))
    elif term.kind in DEGREE_TERM_KINDS:
        deg = g.degrees()
        tab = degree_contribution(term, int(deg.max(initial=0)))
        off_i = deg[:, None] - adj  # toggled-off degree of i against each j
        out = tab[off_i] + tab[off_i.T]
    elif term.kind == "triangles":
        a64 = adj.astype(np.int64)
        out = (a64 @ a64).astype(float)
    elif term.kind == "node_match":
        x = _node_attr(g, term)
        out = (x[:, None] == x[None, :]).astype(float)
    elif term.kind == "abs_diff":
        x = _node_attr(g, term)
        out = np.abs(x[:, None] - x[None, :])
    elif term.kind == "edge_cov":
        out = _dyad_attr(g, term).astype(float).copy()
    else:
        raise ValueError(f"unhandled term kind {term.kind!r}")
    np.fill_diagonal(out, 0.0)
    return out


# ---------------------------------------------------------------------------
# pseudolikelihood design


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Pooled tie-level design: one row per (year, dyad) in the series.

    ``y`` holds the tie indicator, ``X`` the change statistics evaluated with
    the dyad toggled off.  ``years`` and ``dyads`` carry row provenance;
    ``constant_terms`` lists columns without variation (the estimator decides
    what to do with them).
    """

    X: np.ndarray
    y: np.ndarray
    labels: tuple[str, ...]
    years: np.ndarray
    dyads: tuple[tuple[str, str], ...]
    constant_terms: tuple[str, ...]

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])

    @property
    def n_terms(self) -> int:
        return int(self.X.shape[1])


def design_matrix(series, spec: ModelSpec) -> DesignMatrix:
    """Build the pooled pseudolikelihood design for an annual series.

    ``series`` is anything with ``.years`` and ``.slice(year)`` (an EgoSeries
    or a LongitudinalNetwork).  Row count equals the sum over years of
    C(n_nodes, 2); a series with no dyads at all is an error.
    """
    blocks: list[np.ndarray] = []
    responses: list[np.ndarray] = []
    years_out: list[np.ndarray] = []
    dyads_out: list[tuple[str, str]] = []
    for year in series.years:
        g = series.slice(year)
        n = g.n_nodes
        if n < 2:
            continue
        iu = np.triu_indices(n, k=1)
        cols = [change_stat_matrix(t, g)[iu] for t in spec.terms]
        blocks.append(np.column_stack(cols))
        responses.append(g.adj[iu].astype(float))
        years_out.append(np.full(iu[0].shape[0], year, dtype=np.int64))
        dyads_out.extend(
            (g.nodes[a], g.nodes[b]) for a, b in zip(iu[0], iu[1])
        )
    if not blocks:
        raise DataError("series yields an empty design (no dyads in any year)")
    X = np.vstack(blocks)
    y = np.concatenate(responses)
    years = np.concatenate(years_out)
    constant = tuple(
        lab for k, lab in enumerate(spec.labels) if np.ptp(X[:, k]) == 0.0
    )
    return DesignMatrix(
        X=X,
        y=y,
        labels=spec.labels,
        years=years,
        dyads=tuple(dyads_out),
        constant_terms=constant,
    )
