"""Longitudinal alliance-network data model.

Ingests one-record-per-dyad-year edge data into an annual network series,
partitions it into named historical periods, and extracts per-actor
ego-networks (first-order alters, ego excluded from the alter graph).

Conventions fixed here and relied on downstream:
  * a tie exists in a year iff a record with at least one commitment flag
    (defensive / offensive / neutrality / nonaggression) exists for the dyad;
    ``secret`` marks a provision and does not create a tie by itself;
  * ``alliance_years`` counts consecutive prior treaty years (0 in the first
    year of a run) and is recomputed from the tie history at ingest;
  * dyad attributes exist only where a tie exists; attribute matrices carry 0
    for untied dyads;
  * actors referenced by dyad rows but absent from the node-attribute table
    get imputed defaults (non-democracy, cinc 0, non-revisionist).
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DataError, UnsupportedFeatureError

__all__ = [
    "NodeYearAttrs",
    "DyadYearRecord",
    "PeriodDef",
    "GraphSlice",
    "LongitudinalNetwork",
    "EgoSeries",
    "ExcludedActor",
    "EgoExtraction",
    "ingest_dyad_years",
    "partition",
    "extract_egos",
    "collapse_treaty_rows",
    "read_dyad_csv",
    "read_node_csv",
    "write_dyad_csv",
    "write_node_csv",
    "to_dyad_rows",
    "to_node_rows",
    "dyad_key",
]

NODE_ATTR_NAMES = ("regime_democracy", "cinc", "revisionist")
DYAD_FLAG_NAMES = ("defensive", "offensive", "neutrality", "nonaggression", "secret")
COMMITMENT_FLAGS = ("defensive", "offensive", "neutrality", "nonaggression")
DYAD_ATTR_NAMES = DYAD_FLAG_NAMES + ("institutionalization", "alliance_years")

DYAD_CSV_HEADER = [
    "actor_a", "actor_b", "year",
    "defensive", "offensive", "neutrality", "nonaggression", "secret",
    "institutionalization", "alliance_years",
]
NODE_CSV_HEADER = ["actor", "year", "polity", "cinc", "revisionist"]

# Polity scores run -10..10; democracies are scores strictly greater than 6.
POLITY_MIN, POLITY_MAX = -10, 10
POLITY_DEMOCRACY_THRESHOLD = 6

IMPUTED_DEFAULTS = {"regime_democracy": False, "cinc": 0.0, "revisionist": False}


def dyad_key(a: str, b: str) -> tuple[str, str]:
    """Canonical (sorted) key for an unordered actor pair."""
    if a == b:
        raise DataError(f"self-dyad {a!r}-{b!r} is not allowed")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class NodeYearAttrs:
    """Annual actor attributes."""

    actor_id: str
    year: int
    regime_democracy: bool
    cinc: float
    revisionist: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.cinc <= 1.0:
            raise DataError(
                f"cinc for {self.actor_id} in {self.year} is {self.cinc}; must lie in [0, 1]"
            )


@dataclass(frozen=True)
class DyadYearRecord:
    """One alliance tie between an unordered actor pair in one year."""

    actor_a: str
    actor_b: str
    year: int
    defensive: bool = False
    offensive: bool = False
    neutrality: bool = False
    nonaggression: bool = False
    secret: bool = False
    institutionalization: float = 0.0
    alliance_years: int = 0

    def __post_init__(self) -> None:
        a, b = dyad_key(self.actor_a, self.actor_b)
        object.__setattr__(self, "actor_a", a)
        object.__setattr__(self, "actor_b", b)
        if not any(getattr(self, f) for f in COMMITMENT_FLAGS):
            raise DataError(
                f"dyad {a}-{b} in {self.year} carries no commitment flag; no tie exists"
            )
        if self.institutionalization < 0:
            raise DataError(
                f"dyad {a}-{b} in {self.year} has negative institutionalization"
            )
        if self.alliance_years < 0:
            raise DataError(f"dyad {a}-{b} in {self.year} has negative alliance_years")

    @property
    def dyad(self) -> tuple[str, str]:
        return (self.actor_a, self.actor_b)


@dataclass(frozen=True)
class PeriodDef:
    """Named inclusive year range."""

    name: str
    start_year: int
    end_year: int

    def __post_init__(self) -> None:
        if self.start_year > self.end_year:
            raise DataError(
                f"period {self.name!r} has start {self.start_year} after end {self.end_year}"
            )

    @property
    def years(self) -> range:
        return range(self.start_year, self.end_year + 1)

    def contains(self, year: int) -> bool:
        return self.start_year <= year <= self.end_year


@dataclass(frozen=True, eq=False)
class GraphSlice:
    """One annual cross-section in array form, ready for statistic computation.

    ``adj`` is a symmetric 0/1 int8 matrix with zero diagonal over ``nodes``
    (sorted actor ids).  Attribute arrays align with the node order; dyad
    attribute matrices are symmetric and zero wherever no tie exists.
    """

    year: int
    nodes: tuple[str, ...]
    adj: np.ndarray
    node_attrs: Mapping[str, np.ndarray]
    dyad_attrs: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        n = len(self.nodes)
        if self.adj.shape != (n, n):
            raise DataError(f"adjacency shape {self.adj.shape} does not match {n} nodes")
        if n and (np.diag(self.adj) != 0).any():
            raise DataError(f"adjacency for year {self.year} has nonzero diagonal")
        if n and (self.adj != self.adj.T).any():
            raise DataError(f"adjacency for year {self.year} is not symmetric")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_ties(self) -> int:
        return int(self.adj.sum()) // 2

    def degrees(self) -> np.ndarray:
        return self.adj.sum(axis=1).astype(np.int64)

    def relabeled(self, mapping: Mapping[str, str]) -> "GraphSlice":
        """Same structure with node ids renamed (order must be preserved)."""
        new_nodes = tuple(mapping.get(v, v) for v in self.nodes)
        if sorted(new_nodes) != list(new_nodes):
            raise DataError("relabeling must preserve sorted node order")
        return replace(self, nodes=new_nodes)


class LongitudinalNetwork:
    """Annual network series with per-year node presence, ties and attributes.

    Presence in a year is the union of actors carrying a tie that year and
    actors with a node-attribute record for that year.
    """

    def __init__(
        self,
        years: Sequence[int],
        dyads_by_year: Mapping[int, Mapping[tuple[str, str], DyadYearRecord]],
        node_attrs: Mapping[tuple[str, int], NodeYearAttrs],
        extra_nodes_by_year: Mapping[int, Iterable[str]] | None = None,
        n_imputed: int = 0,
    ) -> None:
        self._years = tuple(sorted(years))
        if len(set(self._years)) != len(self._years):
            raise DataError("duplicate years in network span")
        yearset = set(self._years)
        self._dyads: dict[int, dict[tuple[str, str], DyadYearRecord]] = {
            y: {} for y in self._years
        }
        for y, recs in dyads_by_year.items():
            if y not in yearset:
                raise DataError(f"dyad records for year {y} outside network years")
            for key, rec in recs.items():
                if rec.year != y or rec.dyad != key:
                    raise DataError(f"dyad record {rec} filed under wrong key {key}/{y}")
                self._dyads[y][key] = rec
        self._node_attrs: dict[tuple[str, int], NodeYearAttrs] = {}
        for (actor, y), rec in node_attrs.items():
            if y not in yearset:
                raise DataError(f"node attributes for {actor} in {y} outside network years")
            self._node_attrs[(actor, y)] = rec
        # presence and adjacency
        self._nodes: dict[int, frozenset[str]] = {}
        self._nbrs: dict[int, dict[str, set[str]]] = {}
        extra = extra_nodes_by_year or {}
        for y in self._years:
            present: set[str] = set(extra.get(y, ()))
            nbrs: dict[str, set[str]] = {}
            for (a, b) in self._dyads[y]:
                present.update((a, b))
                nbrs.setdefault(a, set()).add(b)
                nbrs.setdefault(b, set()).add(a)
            for (actor, ay) in self._node_attrs:
                if ay == y:
                    present.add(actor)
            self._nodes[y] = frozenset(present)
            self._nbrs[y] = nbrs
        self.n_imputed = n_imputed
        self._slice_cache: dict[int, GraphSlice] = {}

    # -- basic accessors -------------------------------------------------

    @property
    def years(self) -> tuple[int, ...]:
        return self._years

    def nodes(self, year: int) -> frozenset[str]:
        return self._nodes[year]

    def ties(self, year: int) -> Iterator[tuple[str, str]]:
        return iter(sorted(self._dyads[year]))

    def n_ties(self, year: int) -> int:
        return len(self._dyads[year])

    def has_tie(self, a: str, b: str, year: int) -> bool:
        return dyad_key(a, b) in self._dyads[year]

    def neighbors(self, actor: str, year: int) -> frozenset[str]:
        return frozenset(self._nbrs[year].get(actor, ()))

    def degree(self, actor: str, year: int) -> int:
        return len(self._nbrs[year].get(actor, ()))

    def dyad_record(self, a: str, b: str, year: int) -> DyadYearRecord | None:
        return self._dyads[year].get(dyad_key(a, b))

    def node_record(self, actor: str, year: int) -> NodeYearAttrs | None:
        return self._node_attrs.get((actor, year))

    def all_actors(self) -> tuple[str, ...]:
        actors: set[str] = set()
        for y in self._years:
            actors.update(self._nodes[y])
        return tuple(sorted(actors))

    def dyad_records(self) -> Iterator[DyadYearRecord]:
        for y in self._years:
            for key in sorted(self._dyads[y]):
                yield self._dyads[y][key]

    def node_records(self) -> Iterator[NodeYearAttrs]:
        for key in sorted(self._node_attrs):
            yield self._node_attrs[key]

    # -- array views -----------------------------------------------------

    def slice(self, year: int) -> GraphSlice:
        """Array view of one year over all present nodes (cached)."""
        if year not in self._slice_cache:
            if year not in self._nodes:
                raise DataError(f"year {year} outside network years")
            self._slice_cache[year] = self._build_slice(year, sorted(self._nodes[year]))
        return self._slice_cache[year]

    def induced_slice(self, year: int, nodes: Iterable[str]) -> GraphSlice:
        """Array view of one year restricted to ``nodes`` (sorted order)."""
        chosen = sorted(set(nodes))
        missing = [v for v in chosen if v not in self._nodes[year]]
        if missing:
            raise DataError(f"nodes {missing} not present in year {year}")
        return self._build_slice(year, chosen)

    def _build_slice(self, year: int, nodes: list[str]) -> GraphSlice:
        n = len(nodes)
        index = {v: i for i, v in enumerate(nodes)}
        adj = np.zeros((n, n), dtype=np.int8)
        dyad_attrs = {name: np.zeros((n, n)) for name in DYAD_ATTR_NAMES}
        for (a, b), rec in self._dyads[year].items():
            ia = index.get(a)
            ib = index.get(b)
            if ia is None or ib is None:
                continue
            adj[ia, ib] = adj[ib, ia] = 1
            for name in DYAD_FLAG_NAMES:
                val = float(getattr(rec, name))
                dyad_attrs[name][ia, ib] = dyad_attrs[name][ib, ia] = val
            dyad_attrs["institutionalization"][ia, ib] = dyad_attrs["institutionalization"][ib, ia] = rec.institutionalization
            dyad_attrs["alliance_years"][ia, ib] = dyad_attrs["alliance_years"][ib, ia] = float(rec.alliance_years)
        node_attrs = {name: np.zeros(n) for name in NODE_ATTR_NAMES}
        for i, v in enumerate(nodes):
            rec = self._node_attrs.get((v, year))
            if rec is None:
                vals = IMPUTED_DEFAULTS
                node_attrs["regime_democracy"][i] = float(vals["regime_democracy"])
                node_attrs["cinc"][i] = vals["cinc"]
                node_attrs["revisionist"][i] = float(vals["revisionist"])
            else:
                node_attrs["regime_democracy"][i] = float(rec.regime_democracy)
                node_attrs["cinc"][i] = rec.cinc
                node_attrs["revisionist"][i] = float(rec.revisionist)
        return GraphSlice(year=year, nodes=tuple(nodes), adj=adj,
                          node_attrs=node_attrs, dyad_attrs=dyad_attrs)

    # -- equality --------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LongitudinalNetwork):
            return NotImplemented
        return (
            self._years == other._years
            and self._nodes == other._nodes
            and self._dyads == other._dyads
            and self._node_attrs == other._node_attrs
        )

    def __ne__(self, other: object) -> bool:
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __repr__(self) -> str:
        span = f"{self._years[0]}-{self._years[-1]}" if self._years else "empty"
        total = sum(len(d) for d in self._dyads.values())
        return f"LongitudinalNetwork({span}, {len(self._years)} slices, {total} dyad-years)"


@dataclass(frozen=True, eq=False)
class EgoSeries:
    """Per-year first-order ego-network of one actor over a period.

    The alter graph for a year is the induced subgraph over that year's
    alters; the ego itself is excluded.  Years where the ego has no alters
    hold an empty slice.
    """

    ego_id: str
    period: PeriodDef
    years: tuple[int, ...]
    slices: Mapping[int, GraphSlice]

    def __post_init__(self) -> None:
        if tuple(sorted(self.years)) != self.years:
            raise DataError(f"ego {self.ego_id}: years must be sorted")
        for y in self.years:
            if y not in self.slices:
                raise DataError(f"ego {self.ego_id}: missing slice for year {y}")
            if self.ego_id in self.slices[y].nodes:
                raise DataError(f"ego {self.ego_id} appears in its own alter graph in {y}")

    def alter_set(self, year: int) -> frozenset[str]:
        return frozenset(self.slices[year].nodes)

    def slice(self, year: int) -> GraphSlice:
        return self.slices[year]

    @property
    def max_alters(self) -> int:
        return max((len(s.nodes) for s in self.slices.values()), default=0)

    @classmethod
    def from_slices(cls, ego_id: str, period: PeriodDef,
                    slices: Sequence[GraphSlice]) -> "EgoSeries":
        return cls(
            ego_id=ego_id,
            period=period,
            years=tuple(s.year for s in slices),
            slices={s.year: s for s in slices},
        )


@dataclass(frozen=True)
class ExcludedActor:
    """Actor left out of ego extraction, with its best annual degree."""

    actor_id: str
    max_degree: int


@dataclass(frozen=True)
class EgoExtraction:
    """Extraction output: included ego series plus the exclusion report."""

    egos: tuple[EgoSeries, ...]
    excluded: tuple[ExcludedActor, ...]


# ---------------------------------------------------------------------------
# ingestion


def collapse_treaty_rows(rows: Iterable[DyadYearRecord]) -> list[DyadYearRecord]:
    """Collapse multiple treaty records per dyad-year into single records.

    Commitment and secrecy flags are OR-ed, institutionalization takes the
    maximum, alliance_years the maximum (ingest recomputes it anyway).
    """
    merged: dict[tuple[str, str, int], DyadYearRecord] = {}
    for rec in rows:
        key = (rec.actor_a, rec.actor_b, rec.year)
        cur = merged.get(key)
        if cur is None:
            merged[key] = rec
        else:
            merged[key] = DyadYearRecord(
                actor_a=rec.actor_a,
                actor_b=rec.actor_b,
                year=rec.year,
                defensive=cur.defensive or rec.defensive,
                offensive=cur.offensive or rec.offensive,
                neutrality=cur.neutrality or rec.neutrality,
                nonaggression=cur.nonaggression or rec.nonaggression,
                secret=cur.secret or rec.secret,
                institutionalization=max(cur.institutionalization, rec.institutionalization),
                alliance_years=max(cur.alliance_years, rec.alliance_years),
            )
    return [merged[k] for k in sorted(merged)]


def ingest_dyad_years(
    rows: Iterable[DyadYearRecord],
    node_rows: Iterable[NodeYearAttrs],
    span: tuple[int, int],
) -> LongitudinalNetwork:
    """Build a LongitudinalNetwork from dyad-year and actor-year records.

    Rejects duplicate dyad-year rows and years outside ``span``.  Recomputes
    ``alliance_years`` from consecutive-tie runs (warning on mismatch) and
    imputes default attributes for actor-years seen only in dyad rows
    (warning with the imputation count).
    """
    start, end = span
    if start > end:
        raise DataError(f"span {span} has start after end")
    years = range(start, end + 1)

    node_attrs: dict[tuple[str, int], NodeYearAttrs] = {}
    for rec in node_rows:
        if not start <= rec.year <= end:
            raise DataError(
                f"node attributes for {rec.actor_id} in {rec.year} fall outside span {start}-{end}"
            )
        key = (rec.actor_id, rec.year)
        if key in node_attrs:
            raise DataError(f"duplicate node attributes for {rec.actor_id} in {rec.year}")
        node_attrs[key] = rec

    if not rows:
        warnings.warn("no dyad-year records supplied; network has no ties", stacklevel=2)

    by_dyad: dict[tuple[str, str], dict[int, DyadYearRecord]] = {}
    for rec in rows:
        if not start <= rec.year <= end:
            raise DataError(
                f"dyad {rec.actor_a}-{rec.actor_b} in {rec.year} falls outside span {start}-{end}"
            )
        per_year = by_dyad.setdefault(rec.dyad, {})
        if rec.year in per_year:
            raise DataError(
                f"duplicate dyad-year row for {rec.actor_a}-{rec.actor_b} in {rec.year}"
            )
        per_year[rec.year] = rec

    # recompute alliance_years from consecutive tie runs
    mismatches = 0
    dyads_by_year: dict[int, dict[tuple[str, str], DyadYearRecord]] = {y: {} for y in years}
    for dyad in sorted(by_dyad):
        per_year = by_dyad[dyad]
        prev_year: int | None = None
        run = 0
        for y in sorted(per_year):
            run = run + 1 if prev_year == y - 1 else 0
            rec = per_year[y]
            if rec.alliance_years != run:
                mismatches += 1
                rec = replace(rec, alliance_years=run)
            dyads_by_year[y][dyad] = rec
            prev_year = y
    if mismatches:
        warnings.warn(
            f"alliance_years recomputed from tie history; {mismatches} supplied "
            "values disagreed",
            stacklevel=2,
        )

    # impute attributes for actors seen only in dyad rows
    imputed = 0
    for y, recs in dyads_by_year.items():
        for (a, b) in recs:
            for actor in (a, b):
                if (actor, y) not in node_attrs:
                    node_attrs[(actor, y)] = NodeYearAttrs(
                        actor_id=actor, year=y, **IMPUTED_DEFAULTS
                    )
                    imputed += 1
    if imputed:
        warnings.warn(
            f"imputed default attributes for {imputed} actor-years missing from "
            "the node table",
            stacklevel=2,
        )

    return LongitudinalNetwork(
        years=years,
        dyads_by_year=dyads_by_year,
        node_attrs=node_attrs,
        n_imputed=imputed,
    )


# ---------------------------------------------------------------------------
# partitioning and ego extraction


def partition(net: LongitudinalNetwork, periods: Sequence[PeriodDef]) -> list[LongitudinalNetwork]:
    """Split the series into one network per period (disjoint, within span)."""
    if not periods:
        raise DataError("no periods supplied")
    ordered = sorted(periods, key=lambda p: p.start_year)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start_year <= prev.end_year:
            raise DataError(f"periods {prev.name!r} and {cur.name!r} overlap")
    if list(periods) != ordered:
        raise DataError("periods must be supplied in chronological order")
    yearset = set(net.years)
    out: list[LongitudinalNetwork] = []
    for p in periods:
        missing = [y for y in p.years if y not in yearset]
        if missing:
            raise DataError(
                f"period {p.name!r} includes years {missing[0]}..{missing[-1]} outside the network span"
            )
        dyads = {y: {k: net.dyad_record(*k, y) for k in net._dyads[y]} for y in p.years}
        attrs = {
            (actor, y): rec
            for (actor, y), rec in net._node_attrs.items()
            if p.contains(y)
        }
        out.append(
            LongitudinalNetwork(years=p.years, dyads_by_year=dyads, node_attrs=attrs)
        )
    return out


def extract_egos(
    period_net: LongitudinalNetwork,
    min_alters: int = 5,
    order: int = 1,
    period: PeriodDef | None = None,
) -> EgoExtraction:
    """Extract one EgoSeries per qualifying actor of a period network.

    An actor qualifies when its degree reaches ``min_alters`` in at least one
    year of the period.  Only first-order alters are supported; the induced
    alter graph excludes the ego.
    """
    if order != 1:
        raise UnsupportedFeatureError(
            f"only first-order ego-networks are supported (got order={order})"
        )
    if min_alters < 1:
        raise DataError(f"min_alters must be >= 1 (got {min_alters})")
    years = period_net.years
    if not years:
        raise DataError("period network has no years")
    if period is None:
        period = PeriodDef(f"{years[0]}-{years[-1]}", years[0], years[-1])

    egos: list[EgoSeries] = []
    excluded: list[ExcludedActor] = []
    for actor in period_net.all_actors():
        max_deg = max(period_net.degree(actor, y) for y in years)
        if max_deg < min_alters:
            excluded.append(ExcludedActor(actor_id=actor, max_degree=max_deg))
            continue
        slices = []
        for y in years:
            alters = period_net.neighbors(actor, y)
            slices.append(period_net.induced_slice(y, alters))
        egos.append(EgoSeries.from_slices(actor, period, slices))
    return EgoExtraction(egos=tuple(egos), excluded=tuple(excluded))


# ---------------------------------------------------------------------------
# serialization

_BOOL = {"0": False, "1": True}


def _parse_bool(raw: str, path: str, lineno: int, col: str) -> bool:
    if raw not in _BOOL:
        raise DataError(f"{path}: line {lineno}: column {col!r} must be 0 or 1, got {raw!r}")
    return _BOOL[raw]


def _parse_int(raw: str, path: str, lineno: int, col: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise DataError(
            f"{path}: line {lineno}: column {col!r} must be an integer, got {raw!r}"
        ) from None


def _parse_float(raw: str, path: str, lineno: int, col: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(
            f"{path}: line {lineno}: column {col!r} must be a number, got {raw!r}"
        ) from None


def read_dyad_csv(path: str | Path) -> list[DyadYearRecord]:
    """Read dyad-year records; errors cite the offending line number."""
    path = str(path)
    out: list[DyadYearRecord] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DYAD_CSV_HEADER:
            raise DataError(
                f"{path}: header {header} does not match expected {DYAD_CSV_HEADER}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(DYAD_CSV_HEADER):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(DYAD_CSV_HEADER)} fields, got {len(row)}"
                )
            vals = dict(zip(DYAD_CSV_HEADER, row))
            try:
                rec = DyadYearRecord(
                    actor_a=vals["actor_a"],
                    actor_b=vals["actor_b"],
                    year=_parse_int(vals["year"], path, lineno, "year"),
                    defensive=_parse_bool(vals["defensive"], path, lineno, "defensive"),
                    offensive=_parse_bool(vals["offensive"], path, lineno, "offensive"),
                    neutrality=_parse_bool(vals["neutrality"], path, lineno, "neutrality"),
                    nonaggression=_parse_bool(vals["nonaggression"], path, lineno, "nonaggression"),
                    secret=_parse_bool(vals["secret"], path, lineno, "secret"),
                    institutionalization=_parse_float(
                        vals["institutionalization"], path, lineno, "institutionalization"
                    ),
                    alliance_years=_parse_int(vals["alliance_years"], path, lineno, "alliance_years"),
                )
            except DataError as err:
                if f"line {lineno}" in str(err):
                    raise
                raise DataError(f"{path}: line {lineno}: {err}") from None
            out.append(rec)
    return out


def read_node_csv(path: str | Path) -> list[NodeYearAttrs]:
    """Read actor-year attributes; polity > 6 marks a democracy."""
    path = str(path)
    out: list[NodeYearAttrs] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != NODE_CSV_HEADER:
            raise DataError(
                f"{path}: header {header} does not match expected {NODE_CSV_HEADER}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(NODE_CSV_HEADER):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(NODE_CSV_HEADER)} fields, got {len(row)}"
                )
            vals = dict(zip(NODE_CSV_HEADER, row))
            polity = _parse_int(vals["polity"], path, lineno, "polity")
            if not POLITY_MIN <= polity <= POLITY_MAX:
                raise DataError(
                    f"{path}: line {lineno}: polity {polity} outside [{POLITY_MIN}, {POLITY_MAX}]"
                )
            cinc = _parse_float(vals["cinc"], path, lineno, "cinc")
            try:
                rec = NodeYearAttrs(
                    actor_id=vals["actor"],
                    year=_parse_int(vals["year"], path, lineno, "year"),
                    regime_democracy=polity > POLITY_DEMOCRACY_THRESHOLD,
                    cinc=cinc,
                    revisionist=_parse_bool(vals["revisionist"], path, lineno, "revisionist"),
                )
            except DataError as err:
                if f"line {lineno}" in str(err):
                    raise
                raise DataError(f"{path}: line {lineno}: {err}") from None
            out.append(rec)
    return out


def to_dyad_rows(net: LongitudinalNetwork) -> list[DyadYearRecord]:
    """All dyad-year records sorted by (year, dyad)."""
    return list(net.dyad_records())


def to_node_rows(net: LongitudinalNetwork) -> list[NodeYearAttrs]:
    """All actor-year attribute records sorted by (actor, year)."""
    return list(net.node_records())


def write_dyad_csv(records: Iterable[DyadYearRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DYAD_CSV_HEADER)
        for rec in records:
            writer.writerow([
                rec.actor_a, rec.actor_b, rec.year,
                int(rec.defensive), int(rec.offensive), int(rec.neutrality),
                int(rec.nonaggression), int(rec.secret),
                repr(rec.institutionalization), rec.alliance_years,
            ])


def write_node_csv(records: Iterable[NodeYearAttrs], path: str | Path) -> None:
    # regime_democracy maps back to a representative polity score (10 or 0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(NODE_CSV_HEADER)
        for rec in records:
            writer.writerow([
                rec.actor_id, rec.year,
                10 if rec.regime_democracy else 0,
                repr(rec.cinc), int(rec.revisionist),
            ])
