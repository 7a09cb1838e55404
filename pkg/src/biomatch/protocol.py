"""Enrollment and two-round verification, expressed purely on values so the
transport layer stays pluggable.

Enrollment quantizes the captured features, selects one lookup-table row per
feature and encrypts it element-wise: the secure template.  Verification is
(1) an oblivious lookup and homomorphic sum at the sensor yielding an
encrypted score, and (2) a blinded compare set built by the service from
which the sensor learns only whether the score reached the threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from . import ec_elgamal as eg
from .ec_elgamal import Ciphertext, GroupParams, PartialCiphertext
from .quantization import (LookupTable, build_table, convolve, make_bins,
                           quantize_feature, table_score_distribution)

__all__ = [
    "SystemConfig",
    "SecureTemplate",
    "CompareSet",
    "build_tables",
    "score_domain",
    "enroll",
    "sensor_lookup_and_sum",
    "service_compare",
    "sensor_decide",
]


@dataclass(frozen=True)
class SystemConfig:
    """Everything both parties must agree on before running the protocol."""

    k: int
    b: int
    delta: float
    rho: Tuple[float, ...]
    threshold: int
    curve: str
    score_min: int  # min of the total score distribution
    score_max: int  # max of the total score distribution

    def __post_init__(self) -> None:
        if len(self.rho) != self.k:
            raise ValueError(f"rho vector length {len(self.rho)} != k = {self.k}")
        if not self.score_min <= self.threshold <= self.score_max:
            raise ValueError(
                f"threshold {self.threshold} outside score domain "
                f"[{self.score_min}, {self.score_max}]")

    @property
    def alpha(self) -> int:
        """Number of compare-set steps above the threshold."""
        return self.score_max - self.threshold

    @classmethod
    def create(cls, k: int, b: int, delta: float, rho: Sequence[float],
               threshold: int, curve: str = eg.DEFAULT_CURVE) -> "SystemConfig":
        """Build a config, deriving the score domain from the lookup tables."""
        tables = [build_table(b, r, delta) for r in rho]
        lo, hi = score_domain(tables)
        return cls(k=k, b=b, delta=delta, rho=tuple(rho), threshold=threshold,
                   curve=curve, score_min=lo, score_max=hi)

    def to_json(self) -> str:
        return json.dumps({
            "k": self.k, "b": self.b, "delta": self.delta,
            "rho": list(self.rho), "threshold": self.threshold,
            "curve": self.curve,
            "score_min": self.score_min, "score_max": self.score_max,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SystemConfig":
        d = json.loads(text)
        return cls(k=d["k"], b=d["b"], delta=d["delta"], rho=tuple(d["rho"]),
                   threshold=d["threshold"], curve=d["curve"],
                   score_min=d["score_min"], score_max=d["score_max"])


def build_tables(config: SystemConfig) -> List[LookupTable]:
    return [build_table(config.b, r, config.delta) for r in config.rho]


def score_domain(tables: Sequence[LookupTable]) -> Tuple[int, int]:
    """Exact bounds of the total score distribution (convolution of the
    per-feature distributions)."""
    total = convolve([table_score_distribution(t) for t in tables])
    return total.min, total.max


@dataclass(frozen=True)
class SecureTemplate:
    """One encrypted lookup-table row per feature, selected by the
    enrollment observation."""

    user_id: str
    k: int
    b: int
    rows: Tuple[Tuple[Ciphertext, ...], ...]

    def __post_init__(self) -> None:
        if len(self.rows) != self.k:
            raise ValueError("template row count != k")
        width = 1 << self.b
        if any(len(r) != width for r in self.rows):
            raise ValueError("template row width != 2^b")


@dataclass(frozen=True)
class CompareSet:
    """Blinded, permuted partial decryptions of {S - t - i : 0 <= i <= alpha}.
    Contains an encryption of zero iff the score reached the threshold."""

    elements: Tuple[PartialCiphertext, ...]


def enroll(features: Sequence[float], user_id: str, config: SystemConfig,
           tables: Sequence[LookupTable], h, params: GroupParams, rng) -> SecureTemplate:
    """Quantize each feature, select its table row and encrypt every entry
    with fresh randomness.  Runs in the trusted enrollment environment."""
    if len(features) != config.k:
        raise ValueError(f"expected {config.k} features, got {len(features)}")
    bins = make_bins(config.b)
    rows = []
    for i, feat in enumerate(features):
        x = quantize_feature(feat, bins)
        row = tables[i].row(x)
        rows.append(tuple(eg.encrypt(int(s), h, params, rng) for s in row))
    return SecureTemplate(user_id=user_id, k=config.k, b=config.b, rows=tuple(rows))


def sensor_lookup_and_sum(probe: Sequence[float], template: SecureTemplate,
                          config: SystemConfig, h, params: GroupParams, rng) -> Ciphertext:
    """Oblivious lookup: the probe selects one ciphertext per row locally,
    nothing about the selection leaves the sensor.  The selected scores are
    summed homomorphically; adding a fresh encryption of zero rerandomizes
    the result so it cannot be linked to template elements."""
    if len(probe) != template.k or template.k != config.k:
        raise ValueError("probe/template/config dimension mismatch")
    bins = make_bins(config.b)
    acc = eg.encrypt(0, h, params, rng)
    for i, feat in enumerate(probe):
        y = quantize_feature(feat, bins)
        acc = eg.add(acc, template.rows[i][y], params)
    return acc


def service_compare(score_ct: Ciphertext, config: SystemConfig, h, a1: int,
                    params: GroupParams, rng) -> CompareSet:
    """Build the compare set: for each i in 0..alpha, blind S - t - i with a
    fresh scalar, partially decrypt, then strip all ordering with a uniform
    permutation.  Exactly one element encodes zero iff S >= t."""
    q = params.q
    elements = []
    for i in range(config.alpha + 1):
        shifted = eg.add(score_ct,
                         eg.encrypt(-(config.threshold + i), h, params, rng),
                         params)
        blinded = eg.scalar_mul(shifted, 1 + rng.randbelow(q - 1), params)
        elements.append(eg.partial_decrypt(blinded, a1, params))
    return CompareSet(elements=tuple(rng.permutation(elements)))


def sensor_decide(cset: CompareSet, a2: int, params: GroupParams) -> bool:
    """Final decryption of every compare-set element; accept iff an identity
    point (plaintext zero) appears."""
    return any(eg.is_zero(eg.final_decrypt(pct, a2, params))
               for pct in cset.elements)
