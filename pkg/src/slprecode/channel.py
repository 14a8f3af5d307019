"""Channel sampling, correlation models, and the block (spatio-temporal) view.

Provides i.i.d. and spatially correlated circular complex Gaussian channel
draws, the exponential correlation matrix, a lazy row view of the block
channel (user row at a slot's antenna-block offset), and the colinearity
diagnostic used to characterize how aligned two users' channels are.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "sample_iid",
    "correlation_matrix",
    "sample_correlated",
    "SpatioTemporalChannel",
    "spatio_temporal",
    "colinearity",
    "to_json",
    "from_json",
]


def sample_iid(K: int, M: int, variance: float = 1.0,
               rng: np.random.Generator | int | None = None) -> np.ndarray:
    """K x M matrix with i.i.d. CN(0, variance) entries (rows = users)."""
    if K < 1 or M < 1:
        raise ValueError("K and M must be at least 1")
    if variance <= 0:
        raise ValueError("variance must be positive")
    gen = np.random.default_rng(rng)
    scale = np.sqrt(variance / 2.0)
    return scale * (gen.standard_normal((K, M))
                    + 1j * gen.standard_normal((K, M)))


def correlation_matrix(M: int, a: complex) -> np.ndarray:
    """Hermitian exponential correlation: C[i, j] = a^(i-j) for i > j."""
    if abs(a) >= 1:
        raise ValueError("correlation coefficient must satisfy |a| < 1")
    C = np.eye(M, dtype=complex)
    for i in range(M):
        for j in range(i):
            C[i, j] = a ** (i - j)
            C[j, i] = np.conj(C[i, j])
    return C


def _psd_sqrt(C: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(C)
    if np.min(w) < -1e-12 * max(1.0, np.max(np.abs(w))):
        raise np.linalg.LinAlgError(
            f"correlation matrix is not PSD (min eigenvalue {np.min(w):.3e})"
        )
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T


def sample_correlated(K: int, M: int, a: complex,
                      rng: np.random.Generator | int | None = None
                      ) -> np.ndarray:
    """Rows h ~ CN(0, C) with C the exponential correlation matrix."""
    C = correlation_matrix(M, a)
    root = _psd_sqrt(C)
    g = sample_iid(K, M, 1.0, rng)
    return g @ root  # row covariance E[h^H h] = root^H root = C


@dataclass(frozen=True)
class SpatioTemporalChannel:
    """Lazy view of a user's block channel over N symbol slots.

    Row n applied to the stacked block vector p = [x[0]; ...; x[N-1]]
    equals h . x[n]; the full N x (N*M) matrix is never materialized.
    """

    h: np.ndarray  # (M,) complex
    N: int

    @property
    def M(self) -> int:
        return self.h.shape[0]

    def row(self, n: int) -> np.ndarray:
        if not 0 <= n < self.N:
            raise IndexError(f"slot {n} out of range [0, {self.N})")
        g = np.zeros(self.N * self.M, dtype=complex)
        g[n * self.M:(n + 1) * self.M] = self.h
        return g

    def apply(self, p: np.ndarray, n: int) -> complex:
        """g[n] . p without forming the row."""
        return complex(self.h @ p[n * self.M:(n + 1) * self.M])


def spatio_temporal(h: np.ndarray, N: int) -> SpatioTemporalChannel:
    if N < 1:
        raise ValueError("N must be at least 1")
    return SpatioTemporalChannel(np.asarray(h, dtype=complex).ravel(), N)


def to_json(H: np.ndarray) -> str:
    """Channel matrix as a JSON array-of-rows of [re, im] pairs."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    rows = [[[float(z.real), float(z.imag)] for z in row] for row in H]
    return json.dumps(rows, indent=1)


def from_json(text: str) -> np.ndarray:
    """Inverse of :func:`to_json`."""
    rows = json.loads(text)
    return np.array([[complex(re_part, im_part) for re_part, im_part in row]
                     for row in rows])


def colinearity(h1: np.ndarray, h2: np.ndarray) -> complex:
    """Normalized inner product h1 h2^H / (||h1|| ||h2||).

    Magnitude near 1 means the two users' channels are nearly aligned
    (hard to serve simultaneously); the angle is the relative phase.
    """
    h1 = np.asarray(h1).ravel()
    h2 = np.asarray(h2).ravel()
    n1, n2 = np.linalg.norm(h1), np.linalg.norm(h2)
    if n1 == 0 or n2 == 0:
        raise ValueError("colinearity undefined for zero channel rows")
    return complex(h1 @ h2.conj() / (n1 * n2))
