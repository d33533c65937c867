"""Generator-set arithmetic for codifferentials.

A codifferential is stored as a pair of finite generator sets whose convex
hulls are the hypodifferential and the hyperdifferential.  All hull-level
operations (Minkowski sums, scaling, truncation) work directly on the
generator lists; extreme points are never extracted.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

# Absolute tolerance on offset comparisons (truncation thresholds and the
# zero-offset slice used for quasidifferentials).
OFFSET_TOL = 1e-10

# Euclidean tolerance on (a, v) pairs used when removing duplicate generators.
DEDUP_TOL = 1e-12

# Soft cap on generator counts.  Exceeding it emits a warning; nothing is
# pruned silently.
GENERATOR_CAP = 4096


class GeneratorCapWarning(UserWarning):
    """A generator set grew past the soft cap."""


class StructuralError(ValueError):
    """Malformed generator data (empty set, non-finite entries, bad shape)."""


@dataclass(frozen=True)
class OffsetPair:
    """One generator (a, v): an offset in function-value units and a vector."""

    offset: float
    vector: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=float)
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "offset", float(self.offset))
        if not np.isfinite(self.offset) or not np.all(np.isfinite(vec)):
            raise StructuralError("offset pair has non-finite entries")

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def norm_sq(self) -> float:
        return self.offset * self.offset + float(self.vector @ self.vector)

    def as_row(self) -> np.ndarray:
        return np.concatenate(([self.offset], self.vector))


def _rows_from(pairs) -> np.ndarray:
    """Build an (n, 1+d) array from an array, OffsetPairs, or (a, v) tuples."""
    if isinstance(pairs, GeneratorSet):
        return pairs.rows
    if isinstance(pairs, np.ndarray):
        rows = np.atleast_2d(np.asarray(pairs, dtype=float))
    else:
        built = []
        for p in pairs:
            if isinstance(p, OffsetPair):
                built.append(p.as_row())
            else:
                a, v = p
                built.append(np.concatenate(([float(a)], np.atleast_1d(np.asarray(v, dtype=float)))))
        if not built:
            raise StructuralError("generator set must be nonempty")
        rows = np.vstack(built)
    if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] < 2:
        raise StructuralError("generator rows must form a nonempty (n, 1+d) array")
    return rows


class GeneratorSet:
    """A nonempty finite generator list; its meaning is the convex hull."""

    __slots__ = ("rows",)

    def __init__(self, pairs, dedup_tol: float = DEDUP_TOL):
        rows = _rows_from(pairs)
        if not np.all(np.isfinite(rows)):
            raise StructuralError("generator set has non-finite entries")
        if dedup_tol is not None:
            rows = _dedup_rows(rows, dedup_tol)
        if rows.shape[0] > GENERATOR_CAP:
            warnings.warn(
                f"generator set has {rows.shape[0]} generators (soft cap {GENERATOR_CAP})",
                GeneratorCapWarning,
                stacklevel=2,
            )
        rows = np.ascontiguousarray(rows)
        rows.setflags(write=False)
        self.rows = rows

    # -- basic views ---------------------------------------------------------

    @property
    def offsets(self) -> np.ndarray:
        return self.rows[:, 0]

    @property
    def vectors(self) -> np.ndarray:
        return self.rows[:, 1:]

    @property
    def dim(self) -> int:
        return self.rows.shape[1] - 1

    def __len__(self) -> int:
        return self.rows.shape[0]

    def __iter__(self) -> Iterator[OffsetPair]:
        for row in self.rows:
            yield OffsetPair(row[0], row[1:])

    def __getitem__(self, i: int) -> OffsetPair:
        row = self.rows[i]
        return OffsetPair(row[0], row[1:])

    def __repr__(self) -> str:
        return f"GeneratorSet({self.rows.tolist()})"

    # -- geometry ------------------------------------------------------------

    def support(self, direction) -> float:
        """Support function of the hull at a direction in (a, v) space."""
        d = np.asarray(direction, dtype=float)
        return float(np.max(self.rows @ d))

    def shift(self, pair: OffsetPair) -> "GeneratorSet":
        """Minkowski sum with the singleton {pair}."""
        if pair.dim != self.dim:
            raise StructuralError("dimension mismatch in shift")
        return GeneratorSet(self.rows + pair.as_row(), dedup_tol=None)

    def shift_offset(self, delta: float) -> "GeneratorSet":
        """Add (delta, 0) to every generator."""
        rows = self.rows.copy()
        rows[:, 0] += delta
        return GeneratorSet(rows, dedup_tol=None)

    def negate(self) -> "GeneratorSet":
        return GeneratorSet(-self.rows, dedup_tol=None)

    # -- serialization -------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {"pairs": [[row[0], list(row[1:])] for row in self.rows.tolist()]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict) -> "GeneratorSet":
        return cls([(a, v) for a, v in obj["pairs"]], dedup_tol=None)

    @classmethod
    def from_json(cls, text: str) -> "GeneratorSet":
        return cls.from_json_obj(json.loads(text))


def _dedup_rows(rows: np.ndarray, tol: float) -> np.ndarray:
    """Greedy first-wins dedup at Euclidean tolerance tol on (a, v) rows."""
    if tol < 0:
        raise StructuralError("dedup tolerance must be nonnegative")
    if rows.shape[0] > 1:
        # exact duplicates first (Minkowski sums produce many); keeps order
        _, first = np.unique(rows, axis=0, return_index=True)
        rows = rows[np.sort(first)]
    if tol == 0.0 or rows.shape[0] <= 1:
        return rows
    if rows.shape[0] <= 512 or rows.shape[1] > 6:
        kept = np.empty_like(rows)
        kept[0] = rows[0]
        count = 1
        tol_sq = tol * tol
        for row in rows[1:]:
            if np.min(np.sum((kept[:count] - row) ** 2, axis=1)) > tol_sq:
                kept[count] = row
                count += 1
        return kept[:count].copy()
    return _dedup_rows_bucketed(rows, tol)


def _dedup_rows_bucketed(rows: np.ndarray, tol: float) -> np.ndarray:
    """Same greedy dedup via spatial hashing on a tol-sized grid.

    Two rows within tol of each other land in the same or an adjacent grid
    cell, so only neighbor cells need checking; first occurrence still wins.
    """
    from itertools import product as _product

    dim = rows.shape[1]
    offsets = list(_product((-1, 0, 1), repeat=dim))
    cells: dict = {}
    kept = []
    tol_sq = tol * tol
    keys = np.floor(rows / tol).astype(np.int64)
    for row, key_arr in zip(rows, keys):
        key = tuple(key_arr)
        dup = False
        for off in offsets:
            bucket = cells.get(tuple(k + o for k, o in zip(key, off)))
            if bucket is not None:
                for idx in bucket:
                    diff = kept[idx] - row
                    if float(diff @ diff) <= tol_sq:
                        dup = True
                        break
            if dup:
                break
        if not dup:
            cells.setdefault(key, []).append(len(kept))
            kept.append(row)
    return np.asarray(kept)


def dedup(g: GeneratorSet, tol: float = DEDUP_TOL) -> GeneratorSet:
    """Maximal generator subset with pairwise distance > tol, first wins."""
    return GeneratorSet(_dedup_rows(g.rows, tol), dedup_tol=None)


@dataclass(frozen=True)
class Codifferential:
    """A pair [hypo, hyper] of generator sets of equal ambient dimension."""

    hypo: GeneratorSet
    hyper: GeneratorSet

    def __post_init__(self):
        if self.hypo.dim != self.hyper.dim:
            raise StructuralError("hypo/hyper dimension mismatch")

    @property
    def dim(self) -> int:
        return self.hypo.dim

    def is_normalized(self, tol: float = OFFSET_TOL) -> bool:
        return (
            abs(float(np.max(self.hypo.offsets))) <= tol
            and abs(float(np.min(self.hyper.offsets))) <= tol
        )

    def to_json_obj(self) -> dict:
        return {"hypo": self.hypo.to_json_obj(), "hyper": self.hyper.to_json_obj()}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Codifferential":
        return cls(
            GeneratorSet.from_json_obj(obj["hypo"]),
            GeneratorSet.from_json_obj(obj["hyper"]),
        )


@dataclass(frozen=True)
class TruncationParams:
    """Truncation thresholds; +inf keeps everything."""

    nu: float = np.inf
    mu: float = np.inf

    def __post_init__(self):
        if np.isnan(self.nu) or np.isnan(self.mu):
            raise StructuralError("truncation parameters must not be NaN")
        if self.nu < 0 or self.mu < 0:
            raise StructuralError("truncation parameters must be >= 0")


def normalize(cd: Codifferential) -> Codifferential:
    """Shift offsets so that max over hypo is 0 and min over hyper is 0."""
    a_shift = float(np.max(cd.hypo.offsets))
    b_shift = float(np.min(cd.hyper.offsets))
    if a_shift == 0.0 and b_shift == 0.0:
        return cd
    return Codifferential(cd.hypo.shift_offset(-a_shift), cd.hyper.shift_offset(-b_shift))


def minkowski_sum(g1: GeneratorSet, g2: GeneratorSet) -> GeneratorSet:
    """All pairwise sums of generators, deduplicated."""
    if g1.dim != g2.dim:
        raise StructuralError("dimension mismatch in Minkowski sum")
    sums = g1.rows[:, None, :] + g2.rows[None, :, :]
    return GeneratorSet(sums.reshape(-1, g1.rows.shape[1]))


def scale(lam: float, cd: Codifferential) -> Codifferential:
    """Minkowski-Radstrom-Hormander scaling; negative factors swap the pair."""
    lam = float(lam)
    if not np.isfinite(lam):
        raise StructuralError("scale factor must be finite")
    if lam >= 0:
        out = Codifferential(
            GeneratorSet(lam * cd.hypo.rows), GeneratorSet(lam * cd.hyper.rows)
        )
    else:
        out = Codifferential(
            GeneratorSet(lam * cd.hyper.rows), GeneratorSet(lam * cd.hypo.rows)
        )
    return normalize(out)


def truncate_hypo(cd: Codifferential, nu: float) -> GeneratorSet:
    """Generators of the hypodifferential with offset >= -nu."""
    if np.isinf(nu):
        return cd.hypo
    mask = cd.hypo.offsets >= -(nu + OFFSET_TOL)
    return GeneratorSet(cd.hypo.rows[mask], dedup_tol=None)


def truncate_hyper(cd: Codifferential, mu: float) -> GeneratorSet:
    """Generators of the hyperdifferential with offset <= mu."""
    if np.isinf(mu):
        return cd.hyper
    mask = cd.hyper.offsets <= mu + OFFSET_TOL
    return GeneratorSet(cd.hyper.rows[mask], dedup_tol=None)


def extract_quasidifferential(cd: Codifferential):
    """Zero-offset generator vectors of both sets (the quasidifferential).

    Requires a normalized codifferential; returns two (n, d) arrays.
    """
    lower = cd.hypo.vectors[np.abs(cd.hypo.offsets) <= OFFSET_TOL]
    upper = cd.hyper.vectors[np.abs(cd.hyper.offsets) <= OFFSET_TOL]
    if lower.shape[0] == 0 or upper.shape[0] == 0:
        raise StructuralError(
            "no zero-offset generators found; codifferential not normalized "
            "or offset tolerance misconfigured"
        )
    return lower, upper
