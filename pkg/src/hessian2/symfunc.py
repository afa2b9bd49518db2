"""Elementary symmetric polynomials on R^3 and cone classification.

Everything here is exact algebra on triples: sigma_k, the reduced
polynomials sigma_{k;i} (one coordinate removed), membership tests for
the nested cones Gamma_1 .. Gamma_3 and the two boundary pieces of
Gamma_2.
"""

from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

# binomial(3, k) for k = 0..3
_BINOM3 = (1.0, 3.0, 3.0, 1.0)


class ConeClass(enum.Enum):
    GAMMA3 = "Gamma3"
    GAMMA2_NOT3 = "Gamma2_not3"
    GAMMA1_NOT2 = "Gamma1_not2"
    P1 = "P1"
    P2 = "P2"
    OUTSIDE = "Outside"


def _as_triple(lam: Sequence[float]) -> np.ndarray:
    arr = np.asarray(lam, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a triple, got shape {arr.shape}")
    return arr


def sorted_desc(lam: Sequence[float]) -> np.ndarray:
    """Canonical descending view of a triple."""
    return np.sort(_as_triple(lam))[::-1]


def sigma(k: int, lam: Sequence[float]) -> float:
    """k-th elementary symmetric polynomial of a triple, k in {1,2,3}."""
    a, b, c = _as_triple(lam)
    if k == 1:
        return a + b + c
    if k == 2:
        return a * b + b * c + a * c
    if k == 3:
        return a * b * c
    raise ValueError(f"k must be in 1..3, got {k}")


def sigma_all(lam: Sequence[float]) -> tuple[float, float, float]:
    """(sigma_1, sigma_2, sigma_3) in one pass."""
    a, b, c = _as_triple(lam)
    return a + b + c, a * b + b * c + a * c, a * b * c


def sigma_reduced(k: int, i: int, lam: Sequence[float]) -> float:
    """sigma_k of the pair left after removing coordinate i (1-based).

    Equals the partial derivative of sigma_{k+1} with respect to the
    removed coordinate.
    """
    if i not in (1, 2, 3):
        raise ValueError(f"axis index must be in 1..3, got {i}")
    lam = _as_triple(lam)
    rest = np.delete(lam, i - 1)
    if k == 1:
        return float(rest[0] + rest[1])
    if k == 2:
        return float(rest[0] * rest[1])
    raise ValueError(f"k must be in 1..2, got {k}")


def sigma_reduced_all(lam: Sequence[float]) -> np.ndarray:
    """All three sigma_{1;i}: pairwise sums with one coordinate removed."""
    lam = _as_triple(lam)
    return lam.sum() - lam


def classify_cone(lam: Sequence[float], tol: float = 1e-10) -> ConeClass:
    """Tag a triple by the sign pattern of (sigma_1, sigma_2, sigma_3).

    |sigma_j| <= tol is treated as zero, which is what distinguishes the
    boundary tags P1/P2 from the open cones.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    s1, s2, s3 = sigma_all(lam)
    if s1 > tol and s2 > tol and s3 > tol:
        return ConeClass.GAMMA3
    if s1 > tol and s2 > tol and s3 <= tol:
        return ConeClass.GAMMA2_NOT3
    if s1 > tol and s2 < -tol:
        return ConeClass.GAMMA1_NOT2
    if s1 > tol and abs(s2) <= tol and s3 < -tol:
        return ConeClass.P2
    if s1 >= -tol and abs(s2) <= tol and abs(s3) <= tol:
        return ConeClass.P1
    return ConeClass.OUTSIDE


def in_gamma(k: int, lam: Sequence[float]) -> bool:
    """Strict membership in the open cone Gamma_k."""
    if k not in (1, 2, 3):
        raise ValueError(f"k must be in 1..3, got {k}")
    sig = sigma_all(lam)
    return all(sig[j] > 0.0 for j in range(k))


def maclaurin_holds(k: int, l: int, lam: Sequence[float]) -> bool:
    """Check [sigma_k/C(3,k)]^(1/k) <= [sigma_l/C(3,l)]^(1/l).

    Requires lam in Gamma_k and 1 <= l <= k <= 3.  Uses multiplicative
    slack 1 + 1e-12 since the inequality is scale invariant.
    """
    if not (1 <= l <= k <= 3):
        raise ValueError(f"need 1 <= l <= k <= 3, got l={l}, k={k}")
    if not in_gamma(k, lam):
        raise ValueError("triple is not in Gamma_k")
    sig = sigma_all(lam)
    lhs = (sig[k - 1] / _BINOM3[k]) ** (1.0 / k)
    rhs = (sig[l - 1] / _BINOM3[l]) ** (1.0 / l)
    return lhs <= rhs * (1.0 + 1e-12)
