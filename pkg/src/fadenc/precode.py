"""Correlation-matrix factorization and the decorrelating precoder.

``C = U Sc U^T = U F Sh F^H U^T`` with ``U`` the eigenvectors of ``C``, ``F``
the unitary DFT matrix and ``Sh = F^H Sc F``. The precoder is
``P = U F diag(p) Vp^H``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConvergenceError, DomainError
from .link import CorrelationMatrix

__all__ = [
    "Decomposition",
    "jacobi_eigh",
    "dft_matrix",
    "decompose_correlation",
    "build_precoder",
    "transformed_covariance",
]

MAX_SWEEPS = 64


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = MAX_SWEEPS):
    """Cyclic Jacobi eigensolver for a real symmetric matrix.

    Sweeps until the largest off-diagonal magnitude is at most
    ``tol * max(1, ||a||_F)``; raises :class:`ConvergenceError` after
    ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=np.float64)
    k = a.shape[0]
    v = np.eye(k)
    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a))).max() if k > 1 else 0.0
        if off <= tol * scale:
            return np.diag(a).copy(), v
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise ConvergenceError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def dft_matrix(k: int) -> np.ndarray:
    idx = np.arange(k)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / k) / math.sqrt(k)


@dataclass(frozen=True)
class Decomposition:
    u: np.ndarray
    sigma_c: np.ndarray
    f: np.ndarray
    sigma_h: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.diag(self.sigma_c).copy()

    @property
    def dim(self) -> int:
        return self.u.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.u @ self.sigma_c @ self.u.T

    def reconstruct_via_fourier(self) -> np.ndarray:
        return self.u @ self.f @ self.sigma_h @ self.f.conj().T @ self.u.T


def decompose_correlation(c) -> Decomposition:
    """Eigendecomposition with eigenvalues sorted in descending order."""
    if not isinstance(c, CorrelationMatrix):
        c = CorrelationMatrix(c)
    w, v = jacobi_eigh(c.entries)
    if w.min() < -1e-10:
        raise DomainError("correlation matrix is not positive semi-definite")
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    sc = np.diag(w)
    f = dft_matrix(c.dim)
    sh = f.conj().T @ sc @ f
    return Decomposition(u=v, sigma_c=sc, f=f, sigma_h=sh)


def _check_unitary(vp, k):
    vp = np.asarray(vp, dtype=np.complex128)
    if vp.shape != (k, k):
        raise DomainError(f"Vp must be {k}x{k}")
    if np.abs(vp.conj().T @ vp - np.eye(k)).max() > 1e-10:
        raise DomainError("Vp must be unitary")
    return vp


def build_precoder(d: Decomposition, pt, vp="diagonalize", sqrt_power: bool = False) -> np.ndarray:
    """Precoding matrix ``U F diag(pt) Vp^H``.

    ``vp="diagonalize"`` picks the unitary that makes ``P^H C P`` diagonal
    (eigenvectors of ``diag(pt) Sh diag(pt)``); ``vp="identity"`` uses no
    rotation; an explicit unitary matrix is used as given. ``sqrt_power``
    places ``sqrt(pt)`` on the diagonal instead of ``pt``.
    """
    k = d.dim
    pt = np.asarray(pt, dtype=np.float64)
    if pt.shape != (k,):
        raise DomainError(f"power vector must have {k} entries")
    if np.any(pt < 0):
        raise DomainError("stream powers must be >= 0")
    gains = np.sqrt(pt) if sqrt_power else pt
    g = np.diag(gains).astype(np.complex128)
    if isinstance(vp, str):
        if vp == "identity":
            vp_h = np.eye(k, dtype=np.complex128)
        elif vp == "diagonalize":
            m = g @ d.sigma_h @ g
            m = 0.5 * (m + m.conj().T)
            _, w = np.linalg.eigh(m)
            vp_h = w
        else:
            raise DomainError(f"unknown Vp mode {vp!r}")
    else:
        vp_h = _check_unitary(vp, k).conj().T
    return d.u @ d.f @ g @ vp_h


def transformed_covariance(p: np.ndarray, c) -> np.ndarray:
    """``P^H C P``."""
    c = c.entries if isinstance(c, CorrelationMatrix) else np.asarray(c)
    return p.conj().T @ c @ p
