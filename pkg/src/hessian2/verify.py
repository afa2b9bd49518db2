"""Independent verification of a computed solution.

Everything here goes through the physical-solution record only (never the
iteration's internal residual): PDE residual on a sample lattice, the
uniform ellipticity margin against the tau-derived bound, and the
convexity class of the Hessian field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .driver import Solution
from .fexpr import FExpr, evaluate_env
from .spectral import det_entries, min_pair_sum_entries, s2_entries

CONVEXITY_TAGS = (
    "convex_3",
    "two_convex_not_3",
    "one_convex_not_2",
    "one_convex_not_convex",
    "unclassified",
)


@dataclass
class VerificationReport:
    residual_sup: float
    ellipticity_margin_min: float
    ellipticity_bound: float
    convexity: str
    sign_samples: dict[str, int]

    def as_dict(self) -> dict:
        return {
            "residual_sup": self.residual_sup,
            "ellipticity_margin_min": self.ellipticity_margin_min,
            "ellipticity_bound": self.ellipticity_bound,
            "convexity": self.convexity,
            "sign_samples": self.sign_samples,
        }

    @property
    def ellipticity_pass(self) -> bool:
        return self.ellipticity_margin_min >= self.ellipticity_bound


def sample_lattice(sol: Solution, sample_n: int, fraction: float = 0.8) -> np.ndarray:
    """Points of a sample_n^3 lattice kept inside B_{fraction * eps^2}(0)."""
    if sample_n < 2:
        raise ValueError(f"sample_n must be >= 2, got {sample_n}")
    r = fraction * sol.eps * sol.eps
    axis = np.linspace(-r, r, sample_n)
    y1, y2, y3 = np.meshgrid(axis, axis, axis, indexing="ij")
    pts = np.column_stack([y1.ravel(), y2.ravel(), y3.ravel()])
    keep = (pts * pts).sum(axis=1) <= r * r
    return pts[keep]


def physical_residual(sol: Solution, f: FExpr, sample_n: int = 9) -> float:
    """sup |S2[D2u] - f(y, u, Du)| over the sample lattice."""
    pts = sample_lattice(sol, sample_n)
    s2 = s2_entries(*sol.d2u_entries(pts))
    u = sol.u(pts)
    du = sol.du(pts)
    env = {
        "y1": pts[:, 0],
        "y2": pts[:, 1],
        "y3": pts[:, 2],
        "u": u,
        "p1": du[:, 0],
        "p2": du[:, 1],
        "p3": du[:, 2],
    }
    fval = np.broadcast_to(np.asarray(evaluate_env(f, env), dtype=float), s2.shape)
    return float(np.abs(s2 - fval).max())


def _sigma_signs(sol: Solution, sample_n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    pts = sample_lattice(sol, sample_n)
    entries = sol.d2u_entries(pts)
    s1 = entries[0] + entries[1] + entries[2]
    s2 = s2_entries(*entries)
    s3 = det_entries(*entries)
    # classification is scale aware: zero means small against sigma_1(tau)^2
    scale = max(1.0, float(sum(sol.tau.values)) ** 2)
    return s1, s2, s3, 1e-10 * scale


def sign_sample_counts(sol: Solution, sample_n: int = 9) -> dict[str, int]:
    """Counts of the sign patterns of (S1, S2, S3) over the sample points."""
    s1, s2, s3, tol = _sigma_signs(sol, sample_n)
    counts: dict[str, int] = {}
    for vals in zip(s1, s2, s3):
        key = "".join("+" if v > tol else "-" if v < -tol else "0" for v in vals)
        counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items()))


def classify_solution(sol: Solution, sample_n: int = 9) -> str:
    """Convexity class from the sampled sign patterns of (S1, S2, S3).

    A sign-definite S2 separates the 2-convex and strictly-non-2-convex
    classes; an S2 that changes sign or vanishes identically marks the
    cone-boundary solutions (the zero / sign-changing f cases).
    """
    s1, s2, s3, tol = _sigma_signs(sol, sample_n)
    all_s1_pos = bool(np.all(s1 > tol))
    pos2 = bool(np.any(s2 > tol))
    neg2 = bool(np.any(s2 < -tol))
    if all_s1_pos and np.all(s2 > tol) and np.all(s3 > tol):
        return "convex_3"
    if all_s1_pos and not neg2 and pos2 and np.any(s3 < -tol):
        return "two_convex_not_3"
    if all_s1_pos and neg2 and not pos2:
        return "one_convex_not_2"
    if all_s1_pos and np.all(s3 < -tol) and (pos2 == neg2):
        return "one_convex_not_convex"
    return "unclassified"


def ellipticity_report(sol: Solution, sample_n: int = 9) -> tuple[float, float, bool]:
    """(margin_min, bound, pass): smallest pairwise eigenvalue sum of D2u
    over the samples against half the smallest pairwise sum of tau."""
    pts = sample_lattice(sol, sample_n)
    margins = np.asarray(min_pair_sum_entries(*sol.d2u_entries(pts)))
    margin_min = float(margins.min())
    bound = 0.5 * sol.tau.min_pair_sum
    return margin_min, bound, margin_min >= bound


def verification_report(sol: Solution, f: FExpr, sample_n: int = 9) -> VerificationReport:
    margin_min, bound, _ = ellipticity_report(sol, sample_n)
    return VerificationReport(
        residual_sup=physical_residual(sol, f, sample_n),
        ellipticity_margin_min=margin_min,
        ellipticity_bound=bound,
        convexity=classify_solution(sol, sample_n),
        sign_samples=sign_sample_counts(sol, sample_n),
    )
