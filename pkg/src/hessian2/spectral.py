"""Symmetric 3x3 matrices: spectra, the S2 polynomial and its gradient.

Eigenvalues use the trigonometric closed form, which is fast and exact
enough for well separated spectra; a cyclic Jacobi sweep takes over when
eigenvalue gaps shrink below 1e-8 (the closed form loses eigenvector
accuracy near multiplicity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .symfunc import sigma_all

_TWO_PI_3 = 2.0 * math.pi / 3.0


@dataclass(frozen=True)
class SymMat3:
    """Symmetric 3x3 matrix stored by its six independent entries."""

    m11: float
    m22: float
    m33: float
    m12: float = 0.0
    m13: float = 0.0
    m23: float = 0.0

    @classmethod
    def from_matrix(cls, arr: Sequence[Sequence[float]], tol: float = 1e-12) -> "SymMat3":
        a = np.asarray(arr, dtype=float)
        if a.shape != (3, 3):
            raise ValueError(f"expected 3x3 input, got shape {a.shape}")
        scale = 1.0 + float(np.abs(a).max())
        if float(np.abs(a - a.T).max()) > tol * scale:
            raise ValueError("input matrix is not symmetric within tolerance")
        return cls(a[0, 0], a[1, 1], a[2, 2], a[0, 1], a[0, 2], a[1, 2])

    @classmethod
    def from_diag(cls, d: Sequence[float]) -> "SymMat3":
        d1, d2, d3 = (float(v) for v in d)
        return cls(d1, d2, d3)

    def to_array(self) -> np.ndarray:
        return np.array(
            [
                [self.m11, self.m12, self.m13],
                [self.m12, self.m22, self.m23],
                [self.m13, self.m23, self.m33],
            ]
        )

    @property
    def trace(self) -> float:
        return self.m11 + self.m22 + self.m33


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenvalues sorted descending, eigenvectors as orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def eigvals_entries(m11, m22, m33, m12, m13, m23):
    """Closed-form eigenvalues of symmetric 3x3 matrices, vectorized.

    Accepts scalars or equally shaped arrays; returns (lam1, lam2, lam3)
    in descending order.
    """
    m11, m22, m33, m12, m13, m23 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (m11, m22, m33, m12, m13, m23))
    )
    q = (m11 + m22 + m33) / 3.0
    a = m11 - q
    b = m22 - q
    c = m33 - q
    p1 = m12 * m12 + m13 * m13 + m23 * m23
    p2 = a * a + b * b + c * c + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    psafe = np.where(p > 0.0, p, 1.0)
    # det((M - q I)/p), written out for the symmetric entries
    det_b = (
        a * (b * c - m23 * m23)
        - m12 * (m12 * c - m23 * m13)
        + m13 * (m12 * m23 - b * m13)
    ) / (psafe * psafe * psafe)
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    lam1 = q + 2.0 * p * np.cos(phi)
    lam3 = q + 2.0 * p * np.cos(phi + _TWO_PI_3)
    lam2 = 3.0 * q - lam1 - lam3
    return lam1, lam2, lam3


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations; returns (eigenvalues, eigenvector columns)."""
    a = a.copy()
    v = np.eye(3)
    scale = max(1.0, float(np.abs(a).max()))
    for _ in range(64):
        off = max(abs(a[0, 1]), abs(a[0, 2]), abs(a[1, 2]))
        if off <= 1e-15 * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p, q]
            if abs(apq) <= 1e-18 * scale:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            g = np.eye(3)
            g[p, p] = g[q, q] = c
            g[p, q] = s
            g[q, p] = -s
            a = g.T @ a @ g
            v = v @ g
    lam = np.diag(a).copy()
    order = np.argsort(lam)[::-1]
    return lam[order], v[:, order]


def _eigvec_cross(a: np.ndarray, lam: float) -> np.ndarray | None:
    """Eigenvector from cross products of rows of (A - lam I)."""
    b = a - lam * np.eye(3)
    cands = (
        np.cross(b[0], b[1]),
        np.cross(b[0], b[2]),
        np.cross(b[1], b[2]),
    )
    norms = [float(np.linalg.norm(c)) for c in cands]
    k = int(np.argmax(norms))
    scale = max(1.0, float(np.abs(a).max()))
    if norms[k] <= 1e-12 * scale * scale:
        return None
    return cands[k] / norms[k]


def eigen(m: SymMat3) -> SpectralDecomp:
    """Full spectral decomposition with eigenvalues sorted descending."""
    a = m.to_array()
    scale = 1.0 + float(np.abs(a).max())
    l1, l2, l3 = (float(v) for v in eigvals_entries(m.m11, m.m22, m.m33, m.m12, m.m13, m.m23))
    gap = min(l1 - l2, l2 - l3)
    if gap >= 1e-8 * scale:
        v1 = _eigvec_cross(a, l1)
        v2 = _eigvec_cross(a, l2)
        if v1 is not None and v2 is not None:
            v2 = v2 - np.dot(v2, v1) * v1
            n2 = np.linalg.norm(v2)
            if n2 > 0.0:
                v2 = v2 / n2
                v3 = np.cross(v1, v2)
                lam = np.array([l1, l2, l3])
                vec = np.column_stack([v1, v2, v3])
                if _decomp_ok(a, lam, vec, scale):
                    return SpectralDecomp(lam, vec)
    lam, vec = _jacobi(a)
    return SpectralDecomp(lam, vec)


def _decomp_ok(a: np.ndarray, lam: np.ndarray, vec: np.ndarray, scale: float) -> bool:
    resid = float(np.abs(a @ vec - vec * lam[np.newaxis, :]).max())
    ortho = float(np.abs(vec.T @ vec - np.eye(3)).max())
    return resid <= 0.5e-10 * scale and ortho <= 0.5e-10


def s2_entries(m11, m22, m33, m12, m13, m23):
    """S2 as the explicit quadratic polynomial of the entries, vectorized."""
    return (
        m11 * m22
        - m12 * m12
        + m22 * m33
        - m23 * m23
        + m11 * m33
        - m13 * m13
    )


def det_entries(m11, m22, m33, m12, m13, m23):
    """Determinant of a symmetric 3x3 matrix from its entries, vectorized."""
    return (
        m11 * (m22 * m33 - m23 * m23)
        - m12 * (m12 * m33 - m23 * m13)
        + m13 * (m12 * m23 - m22 * m13)
    )


def min_pair_sum_entries(m11, m22, m33, m12, m13, m23):
    """min over i<j of (lam_i + lam_j), vectorized.

    With eigenvalues sorted descending this is lam2 + lam3, i.e. the
    trace minus the largest eigenvalue.
    """
    lam1, _, _ = eigvals_entries(m11, m22, m33, m12, m13, m23)
    return m11 + m22 + m33 - lam1


def s2_value(m: SymMat3) -> float:
    return float(s2_entries(m.m11, m.m22, m.m33, m.m12, m.m13, m.m23))


def s2_gradient(m: SymMat3) -> SymMat3:
    """Matrix derivative of S2: trace(M) I - M."""
    return SymMat3(
        m.m22 + m.m33,
        m.m11 + m.m33,
        m.m11 + m.m22,
        -m.m12,
        -m.m13,
        -m.m23,
    )


def ellipticity_margin(m: SymMat3) -> float:
    """Smallest pairwise eigenvalue sum; positive iff the linearized
    operator at this Hessian is elliptic.

    Goes through eigen() so the Jacobi fallback keeps degenerate spectra
    exact; the vectorized min_pair_sum_entries trades that last 1e-8 of
    accuracy near multiplicity for speed.
    """
    lam = eigen(m).eigenvalues
    return float(lam[1] + lam[2])


def sigma_of_eigenvalues(m: SymMat3) -> tuple[float, float, float]:
    """(sigma_1, sigma_2, sigma_3) of the eigenvalue triple."""
    return sigma_all(eigen(m).eigenvalues)
