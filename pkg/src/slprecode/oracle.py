"""Brute-force verification of the joint rotation problem.

For fixed receiver rotations the precoding problem is convex, so an
exhaustive grid over the rotation angles (first user gauged to zero)
plus one convex solve per grid point gives an independent, certifiable
reference for the branch-and-bound optimizer.  Cost grows as
``(360/resolution)**(K-1)`` solves, so this is restricted to K <= 3.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import datavec, slp
from .conic import Status

__all__ = ["OracleResult", "grid_search"]

log = logging.getLogger(__name__)

_MAX_USERS = 3


@dataclass(frozen=True)
class OracleResult:
    theta: np.ndarray          # best rotation angles (radians), theta_1 = 0
    power: float               # minimum average power (linear)
    grid_theta: np.ndarray     # (G, K) all evaluated angle tuples
    grid_power: np.ndarray     # (G,) average power per grid point (linear)
    skipped: int               # grid points without a clean solve

    @property
    def power_db(self) -> float:
        return 10.0 * math.log10(self.power)


def grid_search(H, constellations, gamma, sigma_z: float = 1.0,
                resolution_deg: float = 2.0) -> OracleResult:
    """Exhaustive rotation search with a convex solve per grid point.

    The first user's angle is fixed to zero (global-phase invariance);
    the remaining K-1 angles sweep [0, 360) degrees in steps of
    ``resolution_deg``.  Grid points whose solve does not come back
    clean are skipped and counted.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    K = H.shape[0]
    if K > _MAX_USERS:
        raise ValueError(
            f"grid search cost is (360/res)^(K-1); refusing K={K} > "
            f"{_MAX_USERS}")

    dset = datavec.reduced_set(constellations)
    steps = int(round(360.0 / resolution_deg))
    axis = np.deg2rad(resolution_deg) * np.arange(steps)

    grid_theta = []
    grid_power = []
    skipped = 0
    best_power = math.inf
    best_theta = np.zeros(K)

    for combo in itertools.product(axis, repeat=K - 1):
        theta = np.zeros(K)
        theta[1:] = combo
        sol = slp.solve_block(H, dset, gamma, sigma_z,
                              rotation=slp.rotation_multipliers(theta))
        if sol.status is not Status.OPTIMAL:
            skipped += 1
            log.warning("oracle: skipping grid point %s (status %s)",
                        np.rad2deg(theta), sol.status.value)
            continue
        grid_theta.append(theta)
        grid_power.append(sol.average_power)
        if sol.average_power < best_power:
            best_power = sol.average_power
            best_theta = theta

    if not grid_power:
        raise RuntimeError("oracle: every grid point failed to solve")
    return OracleResult(best_theta, best_power,
                        np.asarray(grid_theta), np.asarray(grid_power),
                        skipped)
