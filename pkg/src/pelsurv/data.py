"""Stratified sample data model, validation, and CSV/JSON ingestion.

A sample is a list of units, each carrying a stratum, a survey weight,
an observed category ``z``, and a possibly missing response ``y``.
Stratum metadata supplies population sizes, from which the stratum
weight shares ``W_h = N_h / N`` are derived.

The CSV schema is ``stratum,weight,z,y`` with a header row; an empty
``y`` field marks a nonrespondent.  Metadata is JSON of the form
``{"strata": [{"h": 1, "N": 3370}, ...], "categories": ["z1", ...]}``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Union

import numpy as np

from .errors import DataError, NoRespondentsError, ParseError

_CSV_FIELDS = ("stratum", "weight", "z", "y")


@dataclass(frozen=True)
class CategorySpace:
    """Ordered category labels; index ``j`` runs 1..s."""

    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        if len(self.labels) < 1:
            raise DataError("at least one category is required")
        if len(set(self.labels)) != len(self.labels):
            raise DataError("category labels must be unique")

    @property
    def s(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        """1-based index of a label."""
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise DataError(f"unknown category label {label!r}") from None

    def label(self, j: int) -> str:
        if not 1 <= j <= self.s:
            raise DataError(f"category index {j} outside 1..{self.s}")
        return self.labels[j - 1]


@dataclass(frozen=True)
class SampleUnit:
    """One sampled record.

    Parameters
    ----------
    stratum : int
        Stratum identifier, matching a metadata entry.
    weight : float
        Survey weight, positive and finite.  Weights are taken as given;
        they are assumed scaled so that weighted totals estimate
        population means.
    z : int
        Category index in 1..s.
    y : float or None
        Observed response, or None for a nonrespondent.
    """

    stratum: int
    weight: float
    z: int
    y: Union[float, None] = None

    def __post_init__(self):
        w = float(self.weight)
        if not np.isfinite(w) or w <= 0:
            raise DataError(f"weight must be positive and finite, got {self.weight!r}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "stratum", int(self.stratum))
        object.__setattr__(self, "z", int(self.z))
        if self.y is not None:
            yv = float(self.y)
            if not np.isfinite(yv):
                raise DataError(f"y must be finite when present, got {self.y!r}")
            object.__setattr__(self, "y", yv)

    @property
    def responded(self) -> bool:
        return self.y is not None


@dataclass(frozen=True)
class StratumMeta:
    """Population size and weight share of one stratum."""

    h: int
    population_size: int
    weight_share: float

    def __post_init__(self):
        if self.population_size <= 0:
            raise DataError(f"stratum {self.h}: population size must be positive")
        if not 0 < self.weight_share <= 1:
            raise DataError(f"stratum {self.h}: weight share outside (0, 1]")


@dataclass(frozen=True)
class SampleMeta:
    """Category space plus stratum metadata, as read from the meta JSON."""

    categories: CategorySpace
    strata: tuple[StratumMeta, ...]


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding; severity is info, note, warning, or error."""

    severity: str
    message: str

    def __str__(self) -> str:
        return self.message


class PackedView:
    """Array form of a sample, stratum-major in canonical unit order.

    Within each stratum, units are ordered by (z, responded, y, weight)
    so that any two samples holding the same multiset of units produce
    identical arrays, which makes downstream sums reproducible exactly.
    Respondent arrays (prefix ``r_``) are the responding subset in the
    same order.  ``u_pos``/``r_pos`` map rows back to unit positions in
    the originating sample.
    """

    __slots__ = (
        "H", "s", "h_labels", "W", "N_pop", "n", "r",
        "u_start", "u_w", "u_z0", "u_resp", "u_y", "u_pos",
        "r_start", "r_w", "r_y", "r_z0", "r_pos",
    )

    def __init__(self, H, s, h_labels, W, N_pop, u_start, u_w, u_z0, u_resp, u_y, u_pos):
        self.H = H
        self.s = s
        self.h_labels = h_labels
        self.W = W
        self.N_pop = N_pop
        self.u_start = u_start
        self.u_w = u_w
        self.u_z0 = u_z0
        self.u_resp = u_resp
        self.u_y = u_y
        self.u_pos = u_pos
        self.n = np.diff(u_start)
        resp_counts = np.add.reduceat(u_resp.astype(np.int64), u_start[:-1])
        # reduceat yields garbage for empty slices; strata are nonempty by construction
        self.r = resp_counts
        mask = u_resp
        self.r_w = u_w[mask]
        self.r_y = u_y[mask]
        self.r_z0 = u_z0[mask]
        self.r_pos = u_pos[mask]
        self.r_start = np.concatenate(([0], np.cumsum(resp_counts)))

    def stratum_of_units(self) -> np.ndarray:
        """0-based stratum row index per unit."""
        return np.repeat(np.arange(self.H), self.n)

    def stratum_of_respondents(self) -> np.ndarray:
        return np.repeat(np.arange(self.H), np.diff(self.r_start))


def _canonical_order(stratum_idx, z0, resp, y, w, pos):
    # last key is most significant; position breaks exact ties stably
    y_key = np.where(resp, y, 0.0)
    return np.lexsort((pos, w, y_key, ~resp, z0, stratum_idx))


def _build_view(h_labels, W, N_pop, s, stratum_idx, w, z0, resp, y, pos) -> PackedView:
    H = len(h_labels)
    order = _canonical_order(stratum_idx, z0, resp, y, w, pos)
    stratum_idx = stratum_idx[order]
    counts = np.bincount(stratum_idx, minlength=H)
    u_start = np.concatenate(([0], np.cumsum(counts)))
    return PackedView(
        H, s, h_labels, W, N_pop, u_start,
        w[order], z0[order], resp[order], y[order], pos[order],
    )


@dataclass(frozen=True)
class StratifiedSample:
    """A validated stratified sample.

    Units are stored grouped by stratum (in metadata order), preserving
    relative input order within each stratum.  Instances are immutable;
    the packed array view is built lazily and cached.
    """

    categories: CategorySpace
    strata: tuple[StratumMeta, ...]
    units: tuple[SampleUnit, ...]
    _view: PackedView = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        strata = tuple(sorted(self.strata, key=lambda m: m.h))
        if len({m.h for m in strata}) != len(strata):
            raise DataError("duplicate stratum in metadata")
        share_sum = 0.0
        for m in strata:
            share_sum += m.weight_share
        if abs(share_sum - 1.0) > 1e-12:
            raise DataError(f"stratum weight shares sum to {share_sum!r}, expected 1")
        known = {m.h: i for i, m in enumerate(strata)}
        s = self.categories.s
        for u in self.units:
            if u.stratum not in known:
                raise DataError(f"unit references unknown stratum {u.stratum}")
            if not 1 <= u.z <= s:
                raise DataError(f"unit category index {u.z} outside 1..{s}")
        counts = [0] * len(strata)
        for u in self.units:
            counts[known[u.stratum]] += 1
        for m, c in zip(strata, counts):
            if c == 0:
                raise DataError(f"stratum {m.h} has no sampled units")
        units = tuple(sorted(self.units, key=lambda u: known[u.stratum]))
        object.__setattr__(self, "strata", strata)
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "_view", None)

    @property
    def H(self) -> int:
        return len(self.strata)

    @property
    def n_by_stratum(self) -> dict[int, int]:
        return {int(h): int(n) for h, n in zip(self.packed().h_labels, self.packed().n)}

    @property
    def respondents_by_stratum(self) -> dict[int, int]:
        return {int(h): int(r) for h, r in zip(self.packed().h_labels, self.packed().r)}

    def packed(self) -> PackedView:
        if self._view is None:
            h_labels = np.array([m.h for m in self.strata], dtype=np.int64)
            W = np.array([m.weight_share for m in self.strata], dtype=np.float64)
            N_pop = np.array([m.population_size for m in self.strata], dtype=np.int64)
            pos_of = {int(h): i for i, h in enumerate(h_labels)}
            n = len(self.units)
            stratum_idx = np.empty(n, dtype=np.int64)
            w = np.empty(n, dtype=np.float64)
            z0 = np.empty(n, dtype=np.int64)
            resp = np.empty(n, dtype=bool)
            y = np.full(n, np.nan, dtype=np.float64)
            for i, u in enumerate(self.units):
                stratum_idx[i] = pos_of[u.stratum]
                w[i] = u.weight
                z0[i] = u.z - 1
                resp[i] = u.responded
                if u.y is not None:
                    y[i] = u.y
            view = _build_view(
                h_labels, W, N_pop, self.categories.s,
                stratum_idx, w, z0, resp, y, np.arange(n, dtype=np.int64),
            )
            object.__setattr__(self, "_view", view)
        return self._view


def make_strata(population_sizes: Iterable[int], h_labels: Iterable[int] = None) -> tuple[StratumMeta, ...]:
    """Build stratum metadata from population sizes, deriving weight shares."""
    sizes = [int(x) for x in population_sizes]
    labels = list(h_labels) if h_labels is not None else list(range(1, len(sizes) + 1))
    total = sum(sizes)
    if total <= 0:
        raise DataError("total population size must be positive")
    return tuple(
        StratumMeta(h=h, population_size=nh, weight_share=nh / total)
        for h, nh in zip(labels, sizes)
    )


def load_meta(source: Union[str, IO[str]]) -> SampleMeta:
    """Read the metadata JSON (text, path-free; pass file contents or a handle)."""
    text = source.read() if hasattr(source, "read") else source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"metadata is not valid JSON: {exc}") from None
    try:
        entries = doc["strata"]
        labels = doc["categories"]
        sizes = [int(e["N"]) for e in entries]
        hs = [int(e["h"]) for e in entries]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"metadata missing or malformed field: {exc}") from None
    return SampleMeta(categories=CategorySpace(tuple(labels)), strata=make_strata(sizes, hs))


def parse_sample(text: Union[str, IO[str]], meta: SampleMeta) -> StratifiedSample:
    """Parse the CSV schema into a validated sample.

    Raises
    ------
    ParseError
        Malformed rows, unknown labels or strata, nonpositive weights.
    NoRespondentsError
        A stratum whose units all have empty ``y``.
    """
    handle = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.DictReader(handle, restkey="_extra")
    if reader.fieldnames is None:
        raise ParseError("empty input, expected a header row")
    missing = [f for f in _CSV_FIELDS if f not in reader.fieldnames]
    if missing:
        raise ParseError(f"header missing required columns: {', '.join(missing)}")
    known_strata = {m.h for m in meta.strata}
    units = []
    for lineno, row in enumerate(reader, start=2):
        if "_extra" in row or any(row.get(f) is None for f in _CSV_FIELDS):
            raise ParseError(f"row {lineno}: wrong number of fields")
        try:
            stratum = int(row["stratum"])
        except ValueError:
            raise ParseError(f"row {lineno}: non-integer stratum {row['stratum']!r}") from None
        if stratum not in known_strata:
            raise ParseError(f"row {lineno}: unknown stratum {stratum}")
        try:
            weight = float(row["weight"])
        except ValueError:
            raise ParseError(f"row {lineno}: non-numeric weight {row['weight']!r}") from None
        if not np.isfinite(weight) or weight <= 0:
            raise ParseError(f"row {lineno}: weight must be positive, got {row['weight']!r}")
        try:
            z = meta.categories.index_of(row["z"])
        except DataError:
            raise ParseError(f"row {lineno}: unknown category label {row['z']!r}") from None
        y_field = row["y"].strip()
        if y_field == "":
            y = None
        else:
            try:
                y = float(y_field)
            except ValueError:
                raise ParseError(f"row {lineno}: non-numeric y {y_field!r}") from None
            if not np.isfinite(y):
                raise ParseError(f"row {lineno}: y must be finite, got {y_field!r}")
        units.append(SampleUnit(stratum=stratum, weight=weight, z=z, y=y))
    if not units:
        raise ParseError("no data rows")
    sample = StratifiedSample(categories=meta.categories, strata=meta.strata, units=tuple(units))
    for h, r in sample.respondents_by_stratum.items():
        if r == 0:
            raise NoRespondentsError(h)
    return sample


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_sample(sample: StratifiedSample) -> str:
    """CSV text for a sample; parse_sample inverts it on validated input."""
    lines = [",".join(_CSV_FIELDS)]
    for u in sample.units:
        y = "" if u.y is None else _fmt(u.y)
        lines.append(f"{u.stratum},{_fmt(u.weight)},{sample.categories.label(u.z)},{y}")
    return "\n".join(lines) + "\n"


def serialize_imputed(sample: StratifiedSample, values, imputed_mask) -> str:
    """CSV text with every ``y`` filled and an ``imputed`` 0/1 column."""
    lines = [",".join(_CSV_FIELDS) + ",imputed"]
    for u, v, m in zip(sample.units, values, imputed_mask):
        lines.append(
            f"{u.stratum},{_fmt(u.weight)},{sample.categories.label(u.z)},{_fmt(v)},{int(m)}"
        )
    return "\n".join(lines) + "\n"


def validate(sample: StratifiedSample) -> list[Diagnostic]:
    """Report per-cell and per-stratum findings without mutating anything.

    Errors mark strata that cannot support estimation (no respondents);
    warnings mark fragile designs (fewer than 2 units in a stratum);
    notes mark empty cells and cells dominated by nonrespondents.
    """
    view = sample.packed()
    out = []
    strat_units = view.stratum_of_units()
    key = strat_units * view.s + view.u_z0
    cell_total = np.bincount(key, minlength=view.H * view.s).reshape(view.H, view.s)
    cell_resp = np.bincount(key[view.u_resp], minlength=view.H * view.s).reshape(view.H, view.s)
    for hi in range(view.H):
        h = int(view.h_labels[hi])
        n_h = int(view.n[hi])
        r_h = int(view.r[hi])
        w_sum = float(np.sum(view.u_w[view.u_start[hi]:view.u_start[hi + 1]]))
        out.append(Diagnostic("info", f"stratum {h}: n={n_h}, respondents={r_h}, weight sum={w_sum:.6g}"))
        if r_h == 0:
            out.append(Diagnostic("error", f"no respondents in stratum {h}"))
        if n_h < 2:
            out.append(Diagnostic("warning", f"stratum {h} has fewer than 2 sampled units"))
        for j in range(1, view.s + 1):
            total = int(cell_total[hi, j - 1])
            resp = int(cell_resp[hi, j - 1])
            if total == 0:
                out.append(Diagnostic("note", f"cell ({h},{j}) empty"))
            elif total - resp > resp:
                out.append(Diagnostic("note", f"cell ({h},{j}) has more nonrespondents than respondents"))
    return out


def subset_view(view: PackedView, indices: np.ndarray) -> PackedView:
    """A new view holding the units at ``indices`` (with repeats allowed).

    Rows are re-sorted into canonical order per stratum, so two index
    multisets that agree per stratum produce identical views.  Used by
    the with-replacement resampler.
    """
    stratum_idx = np.repeat(np.arange(view.H), view.n)[indices]
    return _build_view(
        view.h_labels, view.W, view.N_pop, view.s,
        stratum_idx, view.u_w[indices], view.u_z0[indices],
        view.u_resp[indices], view.u_y[indices],
        np.arange(len(indices), dtype=np.int64),
    )
