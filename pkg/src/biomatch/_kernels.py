"""Hot scoring kernels for the evaluation harness.

Two implementations of each kernel: a numba @njit loop and a pure-numpy
fallback.  Set BIOMATCH_PURE_NUMPY=1 before import to force the fallback
(also the escape hatch on platforms without numba).  `biomatch bench
--kernels` compares the two paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

USE_NUMBA = os.environ.get("BIOMATCH_PURE_NUMPY", "0") != "1"

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:
        USE_NUMBA = False


def _quantized_scores_np(interior: np.ndarray, tables: np.ndarray,
                         enroll: np.ndarray, probe: np.ndarray) -> np.ndarray:
    m, k = enroll.shape
    xb = np.searchsorted(interior, enroll.ravel(), side="right").reshape(m, k)
    yb = np.searchsorted(interior, probe.ravel(), side="right").reshape(m, k)
    feat = np.arange(k)
    return tables[feat, xb, yb].sum(axis=1, dtype=np.int64)


def _continuous_scores_np(rho: np.ndarray, enroll: np.ndarray,
                          probe: np.ndarray) -> np.ndarray:
    det = 1.0 - rho * rho
    p, t = enroll, probe
    quad = (p * p - 2.0 * rho * p * t + t * t) / det
    lam = 0.5 * ((p * p + t * t) - quad) - 0.5 * np.log(det)
    return lam.sum(axis=1)


if USE_NUMBA:

    @njit(cache=True)
    def _quantized_scores_nb(interior, tables, enroll, probe):  # pragma: no cover
        m, k = enroll.shape
        out = np.empty(m, dtype=np.int64)
        for i in range(m):
            s = 0
            for j in range(k):
                x = np.searchsorted(interior, enroll[i, j], side="right")
                y = np.searchsorted(interior, probe[i, j], side="right")
                s += tables[j, x, y]
            out[i] = s
        return out

    @njit(cache=True)
    def _continuous_scores_nb(rho, enroll, probe):  # pragma: no cover
        m, k = enroll.shape
        out = np.empty(m)
        for i in range(m):
            s = 0.0
            for j in range(k):
                r = rho[j]
                det = 1.0 - r * r
                p = enroll[i, j]
                t = probe[i, j]
                quad = (p * p - 2.0 * r * p * t + t * t) / det
                s += 0.5 * ((p * p + t * t) - quad) - 0.5 * math.log(det)
            out[i] = s
        return out


def quantized_scores(interior: np.ndarray, tables: np.ndarray,
                     enroll: np.ndarray, probe: np.ndarray) -> np.ndarray:
    """Summed lookup-table scores for m trial pairs.

    interior: the 2^b - 1 finite bin boundaries; tables: (k, 2^b, 2^b) int32;
    enroll/probe: (m, k) float feature matrices.
    """
    interior = np.ascontiguousarray(interior, dtype=np.float64)
    tables = np.ascontiguousarray(tables, dtype=np.int32)
    enroll = np.ascontiguousarray(enroll, dtype=np.float64)
    probe = np.ascontiguousarray(probe, dtype=np.float64)
    if USE_NUMBA:
        return _quantized_scores_nb(interior, tables, enroll, probe)
    return _quantized_scores_np(interior, tables, enroll, probe)


def continuous_scores(rho: np.ndarray, enroll: np.ndarray,
                      probe: np.ndarray) -> np.ndarray:
    """Continuous log-likelihood-ratio comparator over m trial pairs."""
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    enroll = np.ascontiguousarray(enroll, dtype=np.float64)
    probe = np.ascontiguousarray(probe, dtype=np.float64)
    if USE_NUMBA:
        return _continuous_scores_nb(rho, enroll, probe)
    return _continuous_scores_np(rho, enroll, probe)
