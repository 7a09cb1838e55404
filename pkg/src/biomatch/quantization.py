"""Equiprobable feature binning, quantized-LLR lookup tables, score
quantization and exact score-distribution arithmetic.

A feature is quantized over 2^b equiprobable bins of the standard normal.
For each feature the log-likelihood ratio of every (enroll bin, probe bin)
pair is precomputed, scaled by a step size delta and rounded to an integer,
yielding a 2^b x 2^b lookup table.  The exact distribution of the summed
table scores bounds the compare set used by the protocol.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from .stats_core import bvn_rect_prob, norm_inv_cdf

__all__ = [
    "BinScheme",
    "LookupTable",
    "ScoreDistribution",
    "make_bins",
    "quantize_feature",
    "quantized_llr",
    "quantize_score",
    "build_table",
    "raw_llr_matrix",
    "table_score_distribution",
    "convolve",
    "table_to_bytes",
    "table_from_bytes",
]

# Raw-LLR clamp used when a genuine rectangle mass underflows to zero.
# Unreachable for the parameter ranges this system is run with.
_LLR_FLOOR_LOG_MASS = math.log(1e-300)

_MAGIC = b"QLRT"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BinScheme:
    """2^b equiprobable standard-normal bins; boundaries include +-inf."""

    b: int
    boundaries: np.ndarray = field(repr=False)

    @property
    def n_bins(self) -> int:
        return 1 << self.b

    @property
    def interior(self) -> np.ndarray:
        return self.boundaries[1:-1]


def make_bins(b: int) -> BinScheme:
    """Equiprobable bin boundaries: interior j at norm_inv_cdf(j / 2^b)."""
    if not 1 <= b <= 8:
        raise ValueError(f"b must be in [1, 8], got {b}")
    n = 1 << b
    bounds = np.empty(n + 1)
    bounds[0] = -np.inf
    bounds[-1] = np.inf
    for j in range(1, n):
        bounds[j] = norm_inv_cdf(j / n)
    return BinScheme(b=b, boundaries=bounds)


def quantize_feature(x: float, bins: BinScheme) -> int:
    """Bin index of x; half-open bins, boundary values go to the upper bin."""
    if math.isnan(x):
        raise ValueError("quantize_feature: NaN input")
    return int(np.searchsorted(bins.interior, x, side="right"))


def quantized_llr(x: int, y: int, bins: BinScheme, rho: float) -> float:
    """LLR of bin pair (x, y): ln of the genuine mass over the bin rectangle
    minus ln of the impostor mass, which is exactly 2^-2b by equiprobability."""
    bounds = bins.boundaries
    mass = bvn_rect_prob(bounds[x], bounds[x + 1], bounds[y], bounds[y + 1], rho)
    log_mass = math.log(mass) if mass > 0.0 else _LLR_FLOOR_LOG_MASS
    return log_mass + 2 * bins.b * math.log(2.0)


def quantize_score(s: float, delta: float) -> int:
    """Nearest integer to s / delta, ties rounded away from zero."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    q = s / delta
    return int(math.floor(abs(q) + 0.5)) * (1 if q >= 0 else -1)


@dataclass(frozen=True)
class LookupTable:
    """Integer score table for one feature: scores[x][y] is the quantized LLR
    of enroll bin x against probe bin y."""

    b: int
    rho: float
    delta: float
    scores: np.ndarray = field(repr=False)

    @property
    def n_bins(self) -> int:
        return 1 << self.b

    def row(self, x: int) -> np.ndarray:
        return self.scores[x]


def raw_llr_matrix(b: int, rho: float) -> np.ndarray:
    """Unquantized LLR values for every bin pair.

    The underlying density is exchangeable in (x, y) and even under joint
    negation, and the bin grid is symmetric about zero, so each value is
    computed once per symmetry orbit and mirrored: the matrix is exactly
    symmetric and exactly invariant under rotating the grid 180 degrees.
    """
    bins = make_bins(b)
    n = bins.n_bins
    raw = np.full((n, n), np.nan)
    for x in range(n):
        for y in range(x, n):
            if not math.isnan(raw[x, y]):
                continue
            v = quantized_llr(x, y, bins, rho)
            raw[x, y] = raw[y, x] = v
            raw[n - 1 - x, n - 1 - y] = raw[n - 1 - y, n - 1 - x] = v
    return raw


def build_table(b: int, rho: float, delta: float) -> LookupTable:
    raw = raw_llr_matrix(b, rho)
    n = raw.shape[0]
    scores = np.empty((n, n), dtype=np.int32)
    for x in range(n):
        for y in range(n):
            scores[x, y] = quantize_score(raw[x, y], delta)
    scores.setflags(write=False)
    return LookupTable(b=b, rho=rho, delta=delta, scores=scores)


@dataclass(frozen=True)
class ScoreDistribution:
    """Finite integer-valued probability mass with its support bounds."""

    support: Dict[int, float]
    min: int
    max: int

    @classmethod
    def from_masses(cls, masses: Dict[int, float]) -> "ScoreDistribution":
        nz = {v: p for v, p in masses.items() if p > 0.0}
        if not nz:
            raise ValueError("distribution has no mass")
        return cls(support=nz, min=min(nz), max=max(nz))


def table_score_distribution(table: LookupTable) -> ScoreDistribution:
    """Score distribution of a single feature under the impostor model: every
    bin pair carries mass 2^-2b, so each cell is equiprobable."""
    n = table.n_bins
    cell_mass = 1.0 / (n * n)
    masses: Dict[int, float] = {}
    for v in table.scores.ravel():
        masses[int(v)] = masses.get(int(v), 0.0) + cell_mass
    return ScoreDistribution.from_masses(masses)


def convolve(dists: Sequence[ScoreDistribution]) -> ScoreDistribution:
    """Exact discrete convolution of integer score distributions."""
    if not dists:
        raise ValueError("convolve: need at least one distribution")

    def dense(d: ScoreDistribution) -> np.ndarray:
        arr = np.zeros(d.max - d.min + 1)
        for v, p in d.support.items():
            arr[v - d.min] = p
        return arr

    acc = dense(dists[0])
    lo = dists[0].min
    for d in dists[1:]:
        acc = np.convolve(acc, dense(d))
        lo += d.min
    masses = {lo + i: float(p) for i, p in enumerate(acc) if p > 0.0}
    return ScoreDistribution.from_masses(masses)


def table_to_bytes(table: LookupTable) -> bytes:
    """Versioned binary blob: magic, version, b, delta and rho as big-endian
    binary64, then 2^2b big-endian int32 scores row-major."""
    header = _MAGIC + struct.pack(">BB", _FORMAT_VERSION, table.b)
    header += struct.pack(">dd", table.delta, table.rho)
    body = table.scores.astype(">i4").tobytes()
    return header + body


def table_from_bytes(blob: bytes) -> LookupTable:
    if blob[:4] != _MAGIC:
        raise ValueError("not a lookup-table blob (bad magic)")
    version, b = struct.unpack(">BB", blob[4:6])
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported table format version {version}")
    delta, rho = struct.unpack(">dd", blob[6:22])
    n = 1 << b
    expected = 22 + 4 * n * n
    if len(blob) != expected:
        raise ValueError(f"table blob length {len(blob)}, expected {expected}")
    scores = np.frombuffer(blob[22:], dtype=">i4").reshape(n, n).astype(np.int32)
    scores.setflags(write=False)
    return LookupTable(b=b, rho=rho, delta=delta, scores=scores)
