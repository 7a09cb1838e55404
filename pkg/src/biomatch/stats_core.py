"""Gaussian feature model and the numerical primitives built on it.

Features are modelled as a user-specific mean plus capture noise, with the
total feature distribution standard normal.  The genuine (same-user) pair
distribution is a zero-mean bivariate normal whose off-diagonal entry is the
between-user variance; the impostor pair distribution factors into two
independent standard normals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "FeatureModel",
    "GenuineCovariance",
    "norm_cdf",
    "norm_inv_cdf",
    "bvn_rect_prob",
    "llr_continuous",
    "comparator_continuous",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class FeatureModel:
    """Per-feature Gaussian parameters.

    rho is the between-user variance; the within-user (noise) variance is
    derived as 1 - rho so that the total feature distribution stays N(0, 1).
    """

    rho: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.rho < 1.0):
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")

    @property
    def sigma_w2(self) -> float:
        return 1.0 - self.rho


@dataclass(frozen=True)
class GenuineCovariance:
    """2x2 covariance [[1, rho], [rho, 1]] of a genuine feature pair."""

    rho: float

    def __post_init__(self) -> None:
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1 for a non-degenerate covariance, got {self.rho}")

    @property
    def det(self) -> float:
        return 1.0 - self.rho * self.rho

    def inv_quadform(self, p: float, t: float) -> float:
        """(p t) Sigma^-1 (p t)^T."""
        return (p * p - 2.0 * self.rho * p * t + t * t) / self.det


def norm_cdf(x: float) -> float:
    """Standard normal CDF.  Accepts +-inf; rejects NaN."""
    if math.isnan(x):
        raise ValueError("norm_cdf: NaN input")
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    return 0.5 * math.erfc(-x / _SQRT2)


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# Rational approximation coefficients (Acklam), refined below by one Newton
# step against norm_cdf.
_ICDF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
           1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ICDF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
           6.680131188771972e+01, -1.328068155288572e+01)
_ICDF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
           -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ICDF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
           3.754408661907416e+00)


def norm_inv_cdf(p: float) -> float:
    """Inverse of norm_cdf on (0, 1); |norm_cdf(result) - p| <= 1e-9."""
    if math.isnan(p) or not (0.0 < p < 1.0):
        raise ValueError(f"norm_inv_cdf: p must be in (0, 1), got {p}")

    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_ICDF_C[0] * q + _ICDF_C[1]) * q + _ICDF_C[2]) * q + _ICDF_C[3]) * q
               + _ICDF_C[4]) * q + _ICDF_C[5])
             / ((((_ICDF_D[0] * q + _ICDF_D[1]) * q + _ICDF_D[2]) * q + _ICDF_D[3]) * q + 1.0))
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = ((((((_ICDF_A[0] * r + _ICDF_A[1]) * r + _ICDF_A[2]) * r + _ICDF_A[3]) * r
               + _ICDF_A[4]) * r + _ICDF_A[5]) * q
             / (((((_ICDF_B[0] * r + _ICDF_B[1]) * r + _ICDF_B[2]) * r + _ICDF_B[3]) * r
                 + _ICDF_B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_ICDF_C[0] * q + _ICDF_C[1]) * q + _ICDF_C[2]) * q + _ICDF_C[3]) * q
                + _ICDF_C[4]) * q + _ICDF_C[5])
              / ((((_ICDF_D[0] * q + _ICDF_D[1]) * q + _ICDF_D[2]) * q + _ICDF_D[3]) * q + 1.0))

    # One Newton refinement; skipped where the density underflows (deep tail,
    # where the rational approximation is already accurate in absolute terms).
    pdf = _norm_pdf(x)
    if pdf > 0.0:
        x -= (norm_cdf(x) - p) / pdf
    return x


# Gauss-Legendre abscissae/weights (half-rules; each point used at +-x).
_GL6 = ((0.1713244923791705, 0.9324695142031522),
        (0.3607615730481384, 0.6612093864662647),
        (0.4679139345726904, 0.2386191860831970))
_GL12 = ((0.04717533638651177, 0.9815606342467191),
         (0.1069393259953183, 0.9041172563704750),
         (0.1600783285433464, 0.7699026741943050),
         (0.2031674267230659, 0.5873179542866171),
         (0.2334925365383547, 0.3678314989981802),
         (0.2491470458134029, 0.1252334085114692))
_GL20 = ((0.01761400713915212, 0.9931285991850949),
         (0.04060142980038694, 0.9639719272779138),
         (0.06267204833410906, 0.9122344282513259),
         (0.08327674157670475, 0.8391169718222188),
         (0.1019301198172404, 0.7463319064601508),
         (0.1181945319615184, 0.6360536807265150),
         (0.1316886384491766, 0.5108670019508271),
         (0.1420961093183821, 0.3737060887154196),
         (0.1491729864726037, 0.2277858511416451),
         (0.1527533871307259, 0.07652652113349733))


def _bvn_upper(dh: float, dk: float, r: float) -> float:
    """P(X > dh, Y > dk) for standard bivariate normal with correlation r.

    Genz's quadrature scheme: direct Gauss-Legendre on the Drezner-Wesolowsky
    integrand for |r| < 0.925, a tail expansion plus quadrature otherwise.
    Accuracy is well below 1e-12, comfortably inside the 1e-10 contract.
    """
    if dh == math.inf or dk == math.inf:
        return 0.0
    if dh == -math.inf:
        return 1.0 if dk == -math.inf else norm_cdf(-dk)
    if dk == -math.inf:
        return norm_cdf(-dh)

    h, k = dh, dk
    hk = h * k
    bvn = 0.0
    tp = 2.0 * math.pi

    if abs(r) < 0.925:
        if abs(r) > 0.0:
            if abs(r) < 0.3:
                rule = _GL6
            elif abs(r) < 0.75:
                rule = _GL12
            else:
                rule = _GL20
            hs = 0.5 * (h * h + k * k)
            asr = math.asin(r)
            for w, x in rule:
                for sgn in (-1.0, 1.0):
                    sn = math.sin(0.5 * asr * (sgn * x + 1.0))
                    bvn += w * math.exp((sn * hk - hs) / (1.0 - sn * sn))
            bvn = bvn * asr / (2.0 * tp)
        return bvn + norm_cdf(-h) * norm_cdf(-k)

    if r < 0.0:
        k = -k
        hk = -hk
    if abs(r) < 1.0:
        rule = _GL20
        a_sq = (1.0 - r) * (1.0 + r)
        a = math.sqrt(a_sq)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        asr = -0.5 * (bs / a_sq + hk)
        if asr > -100.0:
            bvn = a * math.exp(asr) * (1.0 - c * (bs - a_sq) * (1.0 - d * bs / 5.0) / 3.0
                                       + c * d * a_sq * a_sq / 5.0)
        if -hk < 100.0:
            b = math.sqrt(bs)
            sp = math.sqrt(tp) * norm_cdf(-b / a)
            bvn -= math.exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
        a *= 0.5
        for w, x in rule:
            for sgn in (-1.0, 1.0):
                xs = (a * (sgn * x + 1.0)) ** 2
                rs = math.sqrt(1.0 - xs)
                asr = -0.5 * (bs / xs + hk)
                if asr > -100.0:
                    sp = 1.0 + c * xs * (1.0 + d * xs)
                    ep = math.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                    bvn += a * w * math.exp(asr) * (ep - sp)
        bvn = -bvn / tp
    if r > 0.0:
        bvn += norm_cdf(-max(h, k))
    else:
        bvn = -bvn
        if k > h:
            bvn += norm_cdf(k) - norm_cdf(h)
    return bvn


def _bvn_cdf(x: float, y: float, rho: float) -> float:
    """P(X <= x, Y <= y)."""
    if x == -math.inf or y == -math.inf:
        return 0.0
    if x == math.inf:
        return norm_cdf(y)
    if y == math.inf:
        return norm_cdf(x)
    return _bvn_upper(-x, -y, rho)


def bvn_rect_prob(xlo: float, xhi: float, ylo: float, yhi: float, rho: float) -> float:
    """Mass of N(0, [[1, rho], [rho, 1]]) over [xlo, xhi] x [ylo, yhi]."""
    if not abs(rho) < 1.0:
        raise ValueError(f"|rho| must be < 1, got {rho}")
    if xlo > xhi or ylo > yhi:
        raise ValueError("empty rectangle: need xlo <= xhi and ylo <= yhi")
    p = (_bvn_cdf(xhi, yhi, rho) - _bvn_cdf(xlo, yhi, rho)
         - _bvn_cdf(xhi, ylo, rho) + _bvn_cdf(xlo, ylo, rho))
    # Corner cancellation can leave a tiny negative residue.
    return min(1.0, max(0.0, p))


def llr_continuous(p: float, t: float, model: FeatureModel) -> float:
    """Log-likelihood ratio of (probe, template) being a genuine pair.

    0.5 * ((p^2 + t^2) - (p t) Sigma^-1 (p t)^T) - 0.5 * ln|Sigma| with
    Sigma = [[1, rho], [rho, 1]].
    """
    rho = model.rho
    if rho == 0.0:
        return 0.0
    cov = GenuineCovariance(rho)
    return 0.5 * ((p * p + t * t) - cov.inv_quadform(p, t)) - 0.5 * math.log(cov.det)


def comparator_continuous(probe: Sequence[float], template: Sequence[float],
                          models: Sequence[FeatureModel]) -> float:
    """Sum of per-feature log-likelihood ratios."""
    if not (len(probe) == len(template) == len(models)):
        raise ValueError("probe, template and models must have equal length")
    if len(probe) == 0:
        raise ValueError("need at least one feature")
    return sum(llr_continuous(p, t, m) for p, t, m in zip(probe, template, models))
