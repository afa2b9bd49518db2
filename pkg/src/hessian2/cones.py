"""Construction of the base quadratic-form parameters tau.

Each constructor returns a descending triple tau with a prescribed value
of sigma_2 and a known cone class, chosen so the base operator
sum_i sigma_{1;i}(tau) d_i^2 is uniformly elliptic (all three reduced
sums strictly positive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .symfunc import ConeClass, classify_cone, sigma, sigma_reduced_all

# |f0| below this counts as zero when dispatching on the sign of f0
F0_ZERO_TOL = 1e-12

MODES = ("auto", "convex", "nonconvex")


@dataclass(frozen=True)
class Tau:
    """Cone parameter: descending triple, cone tag, sigma_2 target."""

    values: tuple[float, float, float]
    cone: ConeClass
    sigma2_target: float

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if not (v[0] >= v[1] >= v[2]):
            raise ValueError(f"tau must be sorted descending, got {self.values}")
        s2 = sigma(2, v)
        if abs(s2 - self.sigma2_target) > 1e-10 * max(1.0, abs(self.sigma2_target)):
            raise ValueError(
                f"sigma_2(tau)={s2!r} misses target {self.sigma2_target!r}"
            )
        if sigma(1, v) <= 0.0:
            raise ValueError(f"sigma_1(tau) must be positive, got {sigma(1, v)!r}")
        reduced = sigma_reduced_all(v)
        if not np.all(reduced > 0.0):
            raise ValueError(
                f"all pairwise sums sigma_1;i must be positive, got {tuple(reduced)}"
            )

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def reduced(self) -> np.ndarray:
        """The three sigma_{1;i}, i.e. pairwise sums of the triple."""
        return sigma_reduced_all(self.array)

    @property
    def min_pair_sum(self) -> float:
        return float(self.reduced.min())


def tau_zero(scale: float = 1.0) -> Tau:
    """Canonical element of P2 (sigma_2 = 0), by default (2, 2, -1)."""
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    return Tau((2.0 * scale, 2.0 * scale, -scale), ConeClass.P2, 0.0)


def tau_negative(a: float, alpha: float = 0.5, beta: float = 0.5) -> Tau:
    """Triple in Gamma_1 \\ closure(Gamma_2) with sigma_2 = a < 0.

    Shape ((1+alpha)(1+beta) Theta, (1+alpha) Theta, -Theta) with Theta
    chosen so that sigma_2 comes out to a; requires (1+beta) alpha < 1.
    """
    if not a < 0.0:
        raise ValueError(f"requires a < 0, got a={a}")
    if not alpha > 0.0:
        raise ValueError(f"requires alpha > 0, got alpha={alpha}")
    if not beta > 0.0:
        raise ValueError(f"requires beta > 0, got beta={beta}")
    side = (1.0 + beta) * alpha - 1.0
    if not side < 0.0:
        raise ValueError(f"requires (1+beta)*alpha - 1 < 0, got {side}")
    theta = math.sqrt(a / ((1.0 + alpha) * side))
    values = (
        (1.0 + alpha) * (1.0 + beta) * theta,
        (1.0 + alpha) * theta,
        -theta,
    )
    return Tau(values, ConeClass.GAMMA1_NOT2, a)


def tau_positive_nonconvex(b: float) -> Tau:
    """Triple in Gamma_2 \\ closure(Gamma_3) with sigma_2 = b > 0.

    Shape (t, t, -t/8); sigma_2 = 3 t^2 / 4, sigma_3 = -t^3/8 < 0.
    """
    if not b > 0.0:
        raise ValueError(f"requires b > 0, got b={b}")
    t = math.sqrt(4.0 * b / 3.0)
    return Tau((t, t, -t / 8.0), ConeClass.GAMMA2_NOT3, b)


def tau_convex(c: float) -> Tau:
    """Isotropic triple in Gamma_3 with sigma_2 = c > 0."""
    if not c > 0.0:
        raise ValueError(f"requires c > 0, got c={c}")
    t = math.sqrt(c / 3.0)
    return Tau((t, t, t), ConeClass.GAMMA3, c)


def select_tau(f0: float, mode: str = "auto") -> Tau:
    """Dispatch on the sign of f0 = f at the base point.

    f0 ~ 0 -> P2 element; f0 < 0 -> the Gamma_1-only family; f0 > 0 ->
    the non-convex Gamma_2 family unless mode='convex' asks for the
    Gamma_3 one.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if abs(f0) <= F0_ZERO_TOL:
        if mode == "convex":
            raise ValueError("mode='convex' requires f0 > 0")
        return tau_zero()
    if f0 < 0.0:
        if mode == "convex":
            raise ValueError("mode='convex' requires f0 > 0")
        return tau_negative(f0, 0.5, 0.5)
    if mode == "convex":
        return tau_convex(f0)
    return tau_positive_nonconvex(f0)


def tau_from_values(values, sigma2_target: float | None = None) -> Tau:
    """Rebuild a Tau from stored values (e.g. a report file)."""
    v = tuple(sorted((float(x) for x in values), reverse=True))
    target = sigma(2, np.asarray(v)) if sigma2_target is None else sigma2_target
    return Tau(v, classify_cone(v), target)
