"""Joint data-vector enumeration and symmetry reduction.

For K users the joint symbol vectors number prod_j M_c,j.  When every
user's constellation is closed under multiplication by a subgroup Z of
{1, i, -1, -i}, the per-vector optimizers satisfy x(zeta*d) = zeta*x(d),
so only one representative per coset needs solving.  Representatives are
keyed on user 1's symbol lying in a half-open fundamental domain, and the
coset map stores (representative index, zeta) for every full vector.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .modem import Constellation

__all__ = [
    "Mode",
    "DataVectorSet",
    "enumerate_all",
    "reduction_group",
    "reduced_set",
    "expand_solutions",
]

_FULL_GROUP = (1 + 0j, 1j, -1 + 0j, -1j)
_SIZE_CAP = 2 ** 20


class Mode(enum.Enum):
    FULL = "full"
    REDUCED = "reduced"


@dataclass(frozen=True)
class DataVectorSet:
    constellations: tuple[Constellation, ...]
    vectors: np.ndarray            # (N_listed, K) complex
    mode: Mode
    group: tuple[complex, ...]     # reduction group Z
    # For REDUCED mode: full-space bookkeeping.
    full_size: int = 0
    coset_rep: np.ndarray | None = None    # full index -> listed rep index
    coset_zeta: np.ndarray | None = None   # full index -> zeta
    full_vectors: np.ndarray | None = None

    @property
    def K(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]


def _point_set_closed(points: np.ndarray, zeta: complex) -> bool:
    rotated = points * zeta
    # set equality with tolerance
    for p in rotated:
        if np.min(np.abs(points - p)) > 1e-9:
            return False
    return True


def reduction_group(constellations) -> tuple[complex, ...]:
    """Largest subgroup of {1, i, -1, -i} closing every user's point set."""
    if all(_point_set_closed(c.points, 1j) for c in constellations):
        return _FULL_GROUP
    if all(_point_set_closed(c.points, -1 + 0j) for c in constellations):
        return (1 + 0j, -1 + 0j)
    return (1 + 0j,)


def _full_product(constellations) -> np.ndarray:
    sizes = [c.order for c in constellations]
    total = int(np.prod(sizes))
    if total > _SIZE_CAP:
        raise ValueError(
            f"joint data-vector count {total} exceeds cap {_SIZE_CAP}"
        )
    grids = [c.points for c in constellations]
    return np.array(list(itertools.product(*grids)), dtype=complex)


def enumerate_all(constellations) -> DataVectorSet:
    constellations = tuple(constellations)
    vecs = _full_product(constellations)
    return DataVectorSet(constellations, vecs, Mode.FULL,
                         group=(1 + 0j,), full_size=len(vecs))


def _domain_mask(points: np.ndarray, group_size: int) -> np.ndarray:
    if group_size == 4:
        return (points.real > 1e-12) & (points.imag >= -1e-12)
    return points.real > 1e-12  # group {1, -1}


def _rotation_permutation(points: np.ndarray, zeta: complex) -> np.ndarray:
    """perm[a] = index of points[a] / zeta (the sets are closed under Z)."""
    dist = np.abs(points[None, :] - (points / zeta)[:, None])
    perm = np.argmin(dist, axis=1)
    if np.any(dist[np.arange(len(points)), perm] > 1e-9):
        raise AssertionError("point set not closed under the claimed group")
    return perm


def reduced_set(constellations) -> DataVectorSet:
    """Representative set keyed on user 1's fundamental-domain symbols."""
    constellations = tuple(constellations)
    Z = reduction_group(constellations)
    full = _full_product(constellations)
    if len(Z) == 1:
        return DataVectorSet(constellations, full, Mode.FULL, group=Z,
                             full_size=len(full))

    rep_mask = _domain_mask(full[:, 0], len(Z))
    reps_idx = np.flatnonzero(rep_mask)
    reps = full[reps_idx]

    # Row i of the product enumeration has mixed-radix digits equal to the
    # per-user point indices, and dividing a vector by zeta permutes each
    # digit, so the whole coset map reduces to integer index arithmetic.
    sizes = [c.order for c in constellations]
    digits = np.unravel_index(np.arange(len(full)), sizes)
    rep_full_idx = np.full(len(full), -1, dtype=int)
    coset_zeta = np.empty(len(full), dtype=complex)
    for zeta in Z:
        perms = [_rotation_permutation(c.points, zeta)
                 for c in constellations]
        mapped = np.ravel_multi_index(
            [perm[d] for perm, d in zip(perms, digits)], sizes)
        hit = (rep_full_idx < 0) & rep_mask[mapped]
        rep_full_idx[hit] = mapped[hit]
        coset_zeta[hit] = zeta
    if np.any(rep_full_idx < 0):
        raise AssertionError(
            "coset map incomplete: no representative for a data vector"
        )
    coset_rep = np.searchsorted(reps_idx, rep_full_idx)

    expected = len(full) // len(Z)
    if len(reps) != expected:
        raise AssertionError(
            f"representative count {len(reps)} != {len(full)}/{len(Z)}"
        )
    return DataVectorSet(constellations, reps, Mode.REDUCED, group=Z,
                         full_size=len(full), coset_rep=coset_rep,
                         coset_zeta=coset_zeta, full_vectors=full)


def expand_solutions(dset: DataVectorSet, rep_outputs: np.ndarray
                     ) -> np.ndarray:
    """Outputs for the full vector list from representative outputs.

    rep_outputs: (len(dset), M) complex, one row per representative.
    Returns (full_size, M): row m equals zeta_m * rep_output[rep_m].
    """
    if dset.mode is Mode.FULL:
        return np.asarray(rep_outputs)
    rep_outputs = np.asarray(rep_outputs)
    if rep_outputs.shape[0] != len(dset):
        raise ValueError("one output row per representative required")
    return dset.coset_zeta[:, None] * rep_outputs[dset.coset_rep]
