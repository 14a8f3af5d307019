"""Block-level optimal beamforming baseline (SINR-constrained power min).

Solves  min sum_j ||w_j||^2  s.t.  |h_j w_j|^2 / (sum_{k != j} |h_j w_k|^2
+ sigma_z^2) >= gamma_j  via the standard rotation: h_j w_j can be taken
real nonnegative without loss of generality, turning each SINR constraint
into a second-order cone row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conic import ComplexProgram, Status, Tolerances

__all__ = ["BeamformingSolution", "optimal_beamforming", "average_power_db"]


@dataclass(frozen=True)
class BeamformingSolution:
    W: np.ndarray            # (M, K) columns w_j
    total_power: float       # sum ||w_j||^2
    sinr: np.ndarray         # achieved per-user SINR
    status: Status

    @property
    def total_power_db(self) -> float:
        return 10.0 * math.log10(self.total_power)


def optimal_beamforming(H: np.ndarray, gamma, sigma_z: float = 1.0,
                        tol: Tolerances = Tolerances()
                        ) -> BeamformingSolution:
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    K, M = H.shape
    g = np.asarray(gamma, dtype=float)
    if g.ndim == 0:
        g = np.full(K, float(g))
    if g.shape != (K,) or np.any(g <= 0):
        raise ValueError("gamma must be a positive scalar or length-K vector")

    cp = ComplexProgram()
    w = [cp.new_complex(M) for _ in range(K)]
    for col in w:
        cp.add_abs_cost(col)

    for j in range(K):
        def dot(col):
            return cp.lincomb([(H[j, m], col[m]) for m in range(M)])
        # (1/sqrt(g_j)) Re{h_j w_j} >= || [h_j w_k (k != j), sigma_z] ||
        head_d, head_c = dot(w[j])
        head = ({v: cf / math.sqrt(g[j]) for v, cf in head_d.items()},
                head_c / math.sqrt(g[j]))
        tail = [dot(w[k]) for k in range(K) if k != j]
        tail.append(({}, complex(sigma_z)))
        cp.add_soc(head, tail)
        cp.add_im_eq(dot(w[j]), 0.0)  # rotation-to-real gauge

    sol = cp.solve(tol)
    W = np.column_stack([cp.values(sol, col) for col in w])
    power = float(np.sum(np.abs(W) ** 2))
    gains = H @ W  # gains[j, k] = h_j w_k
    sig = np.abs(np.diag(gains)) ** 2
    interf = np.sum(np.abs(gains) ** 2, axis=1) - sig
    sinr = sig / (interf + sigma_z ** 2)
    return BeamformingSolution(W, power, sinr, sol.status)


def average_power_db(powers) -> float:
    """10 log10 of the arithmetic mean of linear powers."""
    p = np.asarray(powers, dtype=float)
    if p.size == 0:
        raise ValueError("no power samples")
    return float(10.0 * np.log10(np.mean(p)))
