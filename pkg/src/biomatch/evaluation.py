"""Synthetic population generation and the accuracy / speed experiment
harness: ROC curves, equal error rates and compare-set timing sweeps.

Accuracy runs benchmark the quantized comparator against the continuous one
on the same trial pairs; the encryption layer does not affect accuracy, so
it is left out of those runs.  Timing runs measure the encrypted compare
stage as a function of the compare-set size.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels, ec_elgamal as eg
from .protocol import SystemConfig, sensor_decide, service_compare
from .quantization import build_table, make_bins
from .rng import SecureRng

__all__ = [
    "FeatureSet", "TrialSet", "FEATURE_SETS",
    "gen_population", "trial_pairs", "score_trials",
    "eer", "roc_points", "roc_csv", "bench_alpha", "bench_kernels",
]


@dataclass(frozen=True)
class FeatureSet:
    name: str
    rho: Tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.rho)


FEATURE_SETS = {
    "fs1": FeatureSet("fs1", tuple(round(0.70 + 0.01 * i, 2) for i in range(21))),
    "fs2": FeatureSet("fs2", (0.8,) * 20),
    "fs3": FeatureSet("fs3", (0.7,) * 4 + (0.8,) * 4 + (0.9,) * 4),
}


@dataclass(frozen=True)
class TrialSet:
    """Comparator outputs for genuine (same-user) and impostor pairs."""

    genuine: np.ndarray
    impostor: np.ndarray


def gen_population(fs: FeatureSet, n_users: int, n_captures: int,
                   seed: int) -> np.ndarray:
    """(n_users, n_captures, k) capture array: per-user mean ~ N(0, rho_i),
    capture = mean + N(0, 1 - rho_i)."""
    rng = np.random.default_rng(seed)
    rho = np.asarray(fs.rho)
    means = rng.normal(0.0, np.sqrt(rho), size=(n_users, 1, fs.k))
    noise = rng.normal(0.0, np.sqrt(1.0 - rho), size=(n_users, n_captures, fs.k))
    return means + noise


def trial_pairs(population: np.ndarray, n_impostor: int,
                seed: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """All genuine capture pairs plus n_impostor sampled cross-user pairs.
    Returns (gen_enroll, gen_probe, imp_enroll, imp_probe)."""
    n_users, n_captures, k = population.shape
    rng = np.random.default_rng(seed)

    i_idx, j_idx = np.triu_indices(n_captures, 1)
    gen_enroll = population[:, i_idx, :].reshape(-1, k)
    gen_probe = population[:, j_idx, :].reshape(-1, k)

    u1 = rng.integers(0, n_users, n_impostor)
    u2 = (u1 + rng.integers(1, n_users, n_impostor)) % n_users
    c1 = rng.integers(0, n_captures, n_impostor)
    c2 = rng.integers(0, n_captures, n_impostor)
    imp_enroll = population[u1, c1, :]
    imp_probe = population[u2, c2, :]
    return gen_enroll, gen_probe, imp_enroll, imp_probe


def score_trials(fs: FeatureSet, population: np.ndarray, n_impostor: int,
                 seed: int, b: Optional[int] = None,
                 delta: Optional[float] = None) -> TrialSet:
    """Score all trials; continuous comparator when b is None, otherwise the
    quantized lookup-table comparator with parameters (b, delta)."""
    ge, gp, ie, ip = trial_pairs(population, n_impostor, seed)
    rho = np.asarray(fs.rho)
    if b is None:
        return TrialSet(genuine=_kernels.continuous_scores(rho, ge, gp),
                        impostor=_kernels.continuous_scores(rho, ie, ip))
    if delta is None:
        raise ValueError("delta required for quantized scoring")
    interior = make_bins(b).interior
    tables = np.stack([build_table(b, r, delta).scores for r in fs.rho])
    return TrialSet(genuine=_kernels.quantized_scores(interior, tables, ge, gp),
                    impostor=_kernels.quantized_scores(interior, tables, ie, ip))


def _error_rates(trials: TrialSet,
                 thresholds: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """FAR and FRR at each threshold under the accept rule score >= t."""
    gen = np.sort(trials.genuine)
    imp = np.sort(trials.impostor)
    far = 1.0 - np.searchsorted(imp, thresholds, side="left") / len(imp)
    frr = np.searchsorted(gen, thresholds, side="left") / len(gen)
    return far, frr


def _threshold_grid(trials: TrialSet) -> np.ndarray:
    values = np.unique(np.concatenate([trials.genuine, trials.impostor]))
    # One step past the top so FAR and FRR reach their limits.
    return np.append(values, values[-1] + 1.0)


def eer(trials: TrialSet) -> Tuple[float, float]:
    """Equal error rate and the threshold where FAR and FRR cross, linearly
    interpolated between adjacent thresholds."""
    if len(trials.genuine) == 0 or len(trials.impostor) == 0:
        raise ValueError("need nonempty genuine and impostor trials")
    ts = _threshold_grid(trials)
    far, frr = _error_rates(trials, ts)
    d = far - frr
    idx = np.flatnonzero(d <= 0.0)
    if len(idx) == 0:
        return float(far[-1]), float(ts[-1])
    i = idx[0]
    if i == 0 or d[i] == 0.0:
        return float((far[i] + frr[i]) / 2.0), float(ts[i])
    frac = d[i - 1] / (d[i - 1] - d[i])
    eer_val = far[i - 1] + frac * (far[i] - far[i - 1])
    t_star = ts[i - 1] + frac * (ts[i] - ts[i - 1])
    return float(eer_val), float(t_star)


def roc_points(trials: TrialSet) -> List[Tuple[float, float, float]]:
    """(threshold, FAR, GAR) rows, FAR descending from 1 to 0."""
    ts = _threshold_grid(trials)
    far, frr = _error_rates(trials, ts)
    return [(float(t), float(fa), float(1.0 - fr))
            for t, fa, fr in zip(ts, far, frr)]


def roc_csv(trials: TrialSet) -> str:
    lines = ["threshold,far,gar"]
    for t, fa, gar in roc_points(trials):
        lines.append(f"{t:.10g},{fa:.10g},{gar:.10g}")
    return "\n".join(lines) + "\n"


def bench_alpha(alphas: Sequence[int] = (10, 20, 30, 40, 50, 60, 80),
                curve: str = eg.PAPER_PARITY_CURVE, reps: int = 20,
                rng=None) -> List[Tuple[int, float]]:
    """Median wall time (ms) of the encrypted compare stage (compare-set
    construction plus final decryption) per compare-set size.  Absolute times
    are machine-specific; the shape is linear in alpha."""
    if rng is None:
        rng = SecureRng()
    params = eg.get_params(curve)
    km = eg.keygen(params, rng)
    params.precompute_base(km.h)
    results = []
    for alpha in alphas:
        config = SystemConfig(k=1, b=1, delta=1.0, rho=(0.5,), threshold=0,
                              curve=curve, score_min=0, score_max=alpha)
        score_ct = eg.encrypt(alpha // 2, km.h, params, rng)
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            cset = service_compare(score_ct, config, km.h, km.a1, params, rng)
            sensor_decide(cset, km.a2, params)
            times.append((time.perf_counter() - t0) * 1000.0)
        results.append((alpha, statistics.median(times)))
    return results


def bench_alpha_csv(results: Iterable[Tuple[int, float]]) -> str:
    lines = ["alpha,time_ms"]
    for alpha, ms in results:
        lines.append(f"{alpha},{ms:.3f}")
    return "\n".join(lines) + "\n"


def linear_fit_r2(results: Sequence[Tuple[int, float]]) -> float:
    """R^2 of a least-squares line through (alpha, time) points."""
    x = np.array([a for a, _ in results], dtype=float)
    y = np.array([t for _, t in results], dtype=float)
    coeffs = np.polyfit(x, y, 1)
    resid = y - np.polyval(coeffs, x)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot


def bench_kernels(fs_name: str = "fs2", n_users: int = 200, n_captures: int = 10,
                  n_impostor: int = 100_000, b: int = 4, delta: float = 1.0,
                  seed: int = 1) -> dict:
    """Compare the numba and pure-numpy scoring paths on identical inputs."""
    from . import _kernels as k

    fs = FEATURE_SETS[fs_name]
    pop = gen_population(fs, n_users, n_captures, seed)
    ge, gp, ie, ip = trial_pairs(pop, n_impostor, seed + 1)
    enroll = np.vstack([ge, ie])
    probe = np.vstack([gp, ip])
    interior = make_bins(b).interior
    tables = np.stack([build_table(b, r, delta).scores for r in fs.rho])
    rho = np.asarray(fs.rho)

    out = {"n_pairs": len(enroll), "numba_available": k.USE_NUMBA}
    pairs = [("quantized_numpy", lambda: k._quantized_scores_np(interior, tables, enroll, probe)),
             ("continuous_numpy", lambda: k._continuous_scores_np(rho, enroll, probe))]
    if k.USE_NUMBA:
        # Warm up the JIT outside the timed region.
        k._quantized_scores_nb(interior, tables.astype(np.int32), enroll, probe)
        k._continuous_scores_nb(rho, enroll, probe)
        pairs += [("quantized_numba", lambda: k._quantized_scores_nb(
                       interior, tables.astype(np.int32), enroll, probe)),
                  ("continuous_numba", lambda: k._continuous_scores_nb(rho, enroll, probe))]
    for name, fn in pairs:
        times = []
        for _ in range(5):
            t0 = time.perf_counter()
            fn()
            times.append((time.perf_counter() - t0) * 1000.0)
        out[name + "_ms"] = statistics.median(times)
    return out
