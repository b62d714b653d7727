"""Shared builders for graph slices, ego series and synthetic records."""
from __future__ import annotations

from itertools import combinations

import numpy as np

from egotergm import changestats as cs
from egotergm.netdata import EgoSeries, GraphSlice, PeriodDef


def slice_from_edges(year, n, edges, node_attrs=None, dyad_attrs=None, names=None):
    """GraphSlice over v000..v{n-1} with the given undirected edge list."""
    adj = np.zeros((n, n), dtype=np.int8)
    for a, b in edges:
        adj[a, b] = adj[b, a] = 1
    nodes = tuple(names) if names is not None else tuple(f"v{k:03d}" for k in range(n))
    return GraphSlice(
        year=year,
        nodes=nodes,
        adj=adj,
        node_attrs={k: np.asarray(v, float) for k, v in (node_attrs or {}).items()},
        dyad_attrs={k: np.asarray(v, float) for k, v in (dyad_attrs or {}).items()},
    )


def random_slice(rng, n, p, year=2000, with_attrs=False):
    """Erdos-Renyi slice; attribute tables drawn when asked for."""
    upper = np.triu(rng.random((n, n)) < p, k=1).astype(np.int8)
    adj = upper + upper.T
    node_attrs = {}
    dyad_attrs = {}
    if with_attrs:
        node_attrs = {
            "regime_democracy": (rng.random(n) < 0.5).astype(float),
            "cinc": rng.random(n),
            "revisionist": (rng.random(n) < 0.3).astype(float),
        }
        cov = np.triu(rng.random((n, n)), k=1)
        dyad_attrs = {"institutionalization": cov + cov.T}
    return GraphSlice(
        year=year,
        nodes=tuple(f"v{k:03d}" for k in range(n)),
        adj=adj,
        node_attrs=node_attrs,
        dyad_attrs=dyad_attrs,
    )


def series_from_slices(slices, ego_id="egoX"):
    period = PeriodDef("test", slices[0].year, slices[-1].year)
    return EgoSeries.from_slices(ego_id, period, slices)


def random_series(rng, n, p, n_years, start_year=2000, with_attrs=False, ego_id="egoX"):
    slices = [
        random_slice(rng, n, p, year=start_year + t, with_attrs=with_attrs)
        for t in range(n_years)
    ]
    return series_from_slices(slices, ego_id=ego_id)


def all_graphs(n):
    """Every labeled undirected graph on n nodes, as adjacency matrices."""
    pairs = list(combinations(range(n), 2))
    for bits in range(2 ** len(pairs)):
        adj = np.zeros((n, n), dtype=np.int8)
        for e, (a, b) in enumerate(pairs):
            if bits >> e & 1:
                adj[a, b] = adj[b, a] = 1
        yield adj


def term_battery():
    """One TermSpec per kind, parameters as in the shipped configurations."""
    return [
        cs.edges(),
        cs.kstar(2),
        cs.kstar(3),
        cs.alt_kstar(0.5),
        cs.alt_kstar(2.0),
        cs.gw_degree(0.1),
        cs.gw_degree(1.0),
        cs.triangles(),
        cs.node_match("regime_democracy"),
        cs.abs_diff("cinc"),
        cs.edge_cov("institutionalization"),
    ]


# terms whose statistics are integer-valued on attribute-free graphs
EXACT_KINDS = {"edges", "kstar", "triangles"}
