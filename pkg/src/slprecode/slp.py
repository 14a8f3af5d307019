"""Symbol-level precoding: power minimization under detection-region rows.

For each joint data vector d the transmitter solves

    min ||x||^2   s.t.   s_j = t_j * h_j . x  lies in user j's detection
                         region for symbol d_j, scaled by sigma_z*sqrt(gamma_j)

where the region shape follows the symbol's geometric class: interior
points are pinned exactly (equalities), grid-extreme directions are
one-sided (directed inequalities), and outer points of circular
constellations add a phase-line equality.  Per-symbol and stacked block
solves are both provided (the problem separates across vectors, which the
tests verify rather than assume), plus the symmetry-reduced variant and
lookup-table generation.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import datavec
from .conic import ComplexProgram, Status, Tolerances
from .modem import ClassKind, Constellation

__all__ = [
    "RowKind",
    "ConstraintRow",
    "DetectionConstraints",
    "build_constraints",
    "solve_per_symbol",
    "solve_block",
    "solve_block_reduced",
    "lookup_table",
    "rotation_multipliers",
]


class RowKind(enum.Enum):
    EQ_RE = "eq_re"
    EQ_IM = "eq_im"
    INEQ_RE = "ineq_re"       # direction * Re{s} >= direction * rhs
    INEQ_IM = "ineq_im"
    PHASE = "phase"           # Im{s} - slope * Re{s} = 0


@dataclass(frozen=True)
class ConstraintRow:
    kind: RowKind
    user: int
    slot: int
    rhs: float = 0.0
    direction: int = 0        # +1 / -1 for inequalities
    slope: float = 0.0        # phase-line slope a = tan(angle of d)


@dataclass(frozen=True)
class DetectionConstraints:
    rows: tuple[ConstraintRow, ...]
    K: int
    N: int

    def residual(self, S: np.ndarray) -> float:
        """Max violation at S[j, n] = received (derotated) point values."""
        worst = 0.0
        for r in self.rows:
            s = S[r.user, r.slot]
            if r.kind is RowKind.EQ_RE:
                worst = max(worst, abs(s.real - r.rhs))
            elif r.kind is RowKind.EQ_IM:
                worst = max(worst, abs(s.imag - r.rhs))
            elif r.kind is RowKind.INEQ_RE:
                worst = max(worst, r.direction * (r.rhs - s.real))
            elif r.kind is RowKind.INEQ_IM:
                worst = max(worst, r.direction * (r.rhs - s.imag))
            else:
                worst = max(worst, abs(s.imag - r.slope * s.real))
        return worst


def _rows_for_symbol(point: complex, klass, amp: float, user: int,
                     slot: int) -> list[ConstraintRow]:
    rr, ri = amp * point.real, amp * point.imag
    sr = 0 if abs(point.real) < 1e-12 else (1 if point.real > 0 else -1)
    si = 0 if abs(point.imag) < 1e-12 else (1 if point.imag > 0 else -1)
    k = klass.kind
    if k is ClassKind.INNER:
        return [ConstraintRow(RowKind.EQ_RE, user, slot, rr),
                ConstraintRow(RowKind.EQ_IM, user, slot, ri)]
    if k is ClassKind.EDGE_REAL_FREE:
        return [ConstraintRow(RowKind.INEQ_RE, user, slot, rr, sr),
                ConstraintRow(RowKind.EQ_IM, user, slot, ri)]
    if k is ClassKind.EDGE_IMAG_FREE:
        return [ConstraintRow(RowKind.EQ_RE, user, slot, rr),
                ConstraintRow(RowKind.INEQ_IM, user, slot, ri, si)]
    if k is ClassKind.CORNER:
        return [ConstraintRow(RowKind.INEQ_RE, user, slot, rr, sr),
                ConstraintRow(RowKind.INEQ_IM, user, slot, ri, si)]
    if k is ClassKind.CIRCULAR:
        if sr == 0:  # point on the imaginary axis: vertical phase line
            return [ConstraintRow(RowKind.EQ_RE, user, slot, 0.0),
                    ConstraintRow(RowKind.INEQ_IM, user, slot, ri, si)]
        rows = [ConstraintRow(RowKind.PHASE, user, slot,
                              slope=point.imag / point.real),
                ConstraintRow(RowKind.INEQ_RE, user, slot, rr, sr)]
        if si != 0:
            rows.append(ConstraintRow(RowKind.INEQ_IM, user, slot, ri, si))
        return rows
    raise ValueError(f"unclassified symbol class {klass}")


def build_constraints(constellations, D: np.ndarray, gamma, sigma_z: float,
                      ) -> DetectionConstraints:
    """Rows for data matrix D of shape (N, K): D[n, j] = user j's symbol."""
    D = np.atleast_2d(np.asarray(D, dtype=complex))
    N, K = D.shape
    gamma = _per_user(gamma, K)
    rows: list[ConstraintRow] = []
    for j, cons in enumerate(constellations):
        amp = sigma_z * math.sqrt(gamma[j])
        for n in range(N):
            idx = _point_index(cons, D[n, j])
            rows.extend(_rows_for_symbol(cons.points[idx], cons.classes[idx],
                                         amp, j, n))
    return DetectionConstraints(tuple(rows), K, N)


def _point_index(cons: Constellation, d: complex) -> int:
    idx = int(np.argmin(np.abs(cons.points - d)))
    if abs(cons.points[idx] - d) > 1e-9:
        raise ValueError(f"symbol {d} is not a point of the constellation")
    return idx


def _per_user(gamma, K: int) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if g.ndim == 0:
        g = np.full(K, float(g))
    if g.shape != (K,) or np.any(g <= 0):
        raise ValueError("gamma must be a positive scalar or length-K vector")
    return g


def rotation_multipliers(theta) -> np.ndarray:
    """Receiver derotation angles theta_j -> transmit-side multipliers.

    A receiver that computes r' = y * e^{-i theta_j} sees the detection
    region of the unrotated symbol; the transmitter therefore constrains
    t_j * h_j . x with t_j = e^{-i theta_j}.
    """
    return np.exp(-1j * np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class SLPSolution:
    outputs: np.ndarray       # (N, M) complex, one output vector per d
    powers: np.ndarray        # (N,) per-vector ||x||^2
    average_power: float      # (1/N) sum ||x||^2
    status: Status
    constraints: DetectionConstraints

    @property
    def average_power_db(self) -> float:
        return 10.0 * math.log10(self.average_power)


def _add_region_rows(cp: ComplexProgram, expr_of, det: DetectionConstraints):
    """expr_of(j, n) -> affine complex expression for s_{j,n}."""
    for r in det.rows:
        e = expr_of(r.user, r.slot)
        if r.kind is RowKind.EQ_RE:
            cp.add_re_eq(e, r.rhs)
        elif r.kind is RowKind.EQ_IM:
            cp.add_im_eq(e, r.rhs)
        elif r.kind is RowKind.INEQ_RE:
            cp.add_re_ineq(e, r.rhs, r.direction)
        elif r.kind is RowKind.INEQ_IM:
            cp.add_im_ineq(e, r.rhs, r.direction)
        else:  # PHASE: Im{s} - a Re{s} = 0  as one real equality row
            d, c = e
            coeffs = {}
            for v, cf in d.items():
                w = cf.imag - r.slope * cf.real
                if w != 0.0:
                    coeffs[v] = w
            cp.prob.add_eq(coeffs, -(c.imag - r.slope * c.real))


def solve_per_symbol(H: np.ndarray, d, gamma, sigma_z: float,
                     constellations, rotation=None,
                     tol: Tolerances = Tolerances()) -> SLPSolution:
    """Minimum-power output vector for a single joint data vector d."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    K, M = H.shape
    d = np.asarray(d, dtype=complex).reshape(1, K)
    det = build_constraints(constellations, d, gamma, sigma_z)
    t = np.ones(K, dtype=complex) if rotation is None else np.asarray(rotation)

    cp = ComplexProgram()
    x = cp.new_complex(M)
    cp.add_abs_cost(x)

    def expr_of(j, n):
        return cp.lincomb([(t[j] * H[j, m], x[m]) for m in range(M)])

    _add_region_rows(cp, expr_of, det)
    sol = cp.solve(tol)
    xv = cp.values(sol, x).reshape(1, M)
    p = np.array([np.sum(np.abs(xv) ** 2)])
    return SLPSolution(xv, p, float(p[0]), sol.status, det)


def solve_block(H: np.ndarray, dset: datavec.DataVectorSet, gamma,
                sigma_z: float, rotation=None,
                tol: Tolerances = Tolerances()) -> SLPSolution:
    """One stacked QP over all listed data vectors of the set.

    The stacked variable p holds x[0..N-1] contiguously; user j's row at
    slot n only touches block n (the block-channel row structure), so the
    average-power objective (1/N) sum ||x[n]||^2 is minimized jointly.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    K, M = H.shape
    D = dset.vectors
    N = D.shape[0]
    det = build_constraints(dset.constellations, D, gamma, sigma_z)
    t = np.ones(K, dtype=complex) if rotation is None else np.asarray(rotation)

    cp = ComplexProgram()
    p = cp.new_complex(N * M)
    cp.add_abs_cost(p, weight=1.0 / N)

    def expr_of(j, n):
        blk = p[n * M:(n + 1) * M]
        return cp.lincomb([(t[j] * H[j, m], blk[m]) for m in range(M)])

    _add_region_rows(cp, expr_of, det)
    sol = cp.solve(tol)
    X = cp.values(sol, p).reshape(N, M)
    powers = np.sum(np.abs(X) ** 2, axis=1)
    return SLPSolution(X, powers, float(np.mean(powers)), sol.status, det)


def solve_block_reduced(H: np.ndarray, constellations, gamma, sigma_z: float,
                        rotation=None, tol: Tolerances = Tolerances()
                        ) -> tuple[SLPSolution, datavec.DataVectorSet]:
    """Block solve on the symmetry-reduced set, expanded to the full set.

    Returns the full-set solution (outputs for every joint data vector)
    and the reduced set used.  Average power is identical to the full
    solve because each coset shares one power value.
    """
    dset = datavec.reduced_set(constellations)
    rep = solve_block(H, dset, gamma, sigma_z, rotation=rotation, tol=tol)
    if dset.mode is datavec.Mode.FULL:
        return rep, dset
    X_full = datavec.expand_solutions(dset, rep.outputs)
    powers = np.sum(np.abs(X_full) ** 2, axis=1)
    full_det = build_constraints(constellations, dset.full_vectors,
                                 gamma, sigma_z)
    full = SLPSolution(X_full, powers, float(np.mean(powers)), rep.status,
                       full_det)
    return full, dset


def lookup_table(H: np.ndarray, constellations, gamma, sigma_z: float,
                 rotate: bool = False, tol: Tolerances = Tolerances(),
                 **rotate_kw) -> dict:
    """Offline table {joint symbol indices -> output vector} (+ rotations).

    Pipeline: reduced representative set -> (rotation optimizer if
    ``rotate`` else fixed block solve) -> coset expansion -> full table.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    K = H.shape[0]
    theta = np.zeros(K)
    if rotate:
        from . import slpro  # deferred: slpro builds on this module
        rot = slpro.optimize_rotations(H, constellations, gamma, sigma_z,
                                       **rotate_kw)
        theta = np.mod(rot.theta, 2 * np.pi)
        full, dset = solve_block_reduced(
            H, constellations, gamma, sigma_z,
            rotation=rotation_multipliers(theta), tol=tol)
    else:
        full, dset = solve_block_reduced(H, constellations, gamma, sigma_z,
                                         tol=tol)
    vectors = (dset.full_vectors if dset.mode is datavec.Mode.REDUCED
               else dset.vectors)
    entries = {}
    for n, dvec in enumerate(vectors):
        key = tuple(_point_index(constellations[j], dvec[j])
                    for j in range(K))
        entries[key] = full.outputs[n]
    return {
        "theta": theta,
        "entries": entries,
        "average_power": full.average_power,
        "status": full.status,
    }


def table_to_json(table: dict) -> str:
    ser = {
        "theta": list(map(float, table["theta"])),
        "average_power": table["average_power"],
        "entries": {
            ",".join(map(str, key)): [[z.real, z.imag] for z in x]
            for key, x in table["entries"].items()
        },
    }
    return json.dumps(ser, indent=1)
