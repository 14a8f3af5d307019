"""Conic/quadratic program container and solver interface.

All optimizer modules express their problems here: a quadratic or linear
objective over real scalar variables with affine equality/inequality rows,
second-order cones, and PSD blocks.  Complex-valued formulations are
lowered through :class:`ComplexProgram`, which owns the mapping from
complex variables and Hermitian matrix blocks to interleaved real scalars
(real embedding [[Re, -Im], [Im, Re]] for PSD blocks).

The backend is the Clarabel interior-point solver, driven in its native
standard form (min 1/2 x'Px + q'x  s.t.  Ax + s = b, s in K).  Feasibility
of returned primals is certified here, independently of solver-reported
status: a solution is only labeled OPTIMAL when our own residual check
passes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

import clarabel

__all__ = [
    "Status",
    "Tolerances",
    "ConicProblem",
    "ConicSolution",
    "ComplexProgram",
    "hermitian_embed",
    "svec",
]

_RT2 = math.sqrt(2.0)


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-8
    rel_gap: float = 1e-8
    max_iters: int = 500


def svec(S: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle vectorization (column-major, off-diag * sqrt2).

    Inner products are preserved: svec(A) . svec(B) = tr(A B) for symmetric
    A, B.  This is the PSD-triangle storage order the backend expects.
    """
    n = S.shape[0]
    out = np.empty(n * (n + 1) // 2)
    k = 0
    for c in range(n):
        for r in range(c + 1):
            out[k] = S[r, c] * (_RT2 if r < c else 1.0)
            k += 1
    return out


def smat(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`svec`."""
    S = np.empty((n, n))
    k = 0
    for c in range(n):
        for r in range(c + 1):
            if r < c:
                S[r, c] = S[c, r] = v[k] / _RT2
            else:
                S[r, r] = v[k]
            k += 1
    return S


def hermitian_embed(H: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]].

    H is PSD iff the embedding is PSD; each eigenvalue of H appears twice,
    so tr(embedding) = 2 tr(H).
    """
    R, Imag = H.real, H.imag
    return np.block([[R, -Imag], [Imag, R]])


@dataclass
class _Triplets:
    """COO staging area for one constraint section."""

    rows: list = field(default_factory=list)
    cols: list = field(default_factory=list)
    vals: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    _cache: tuple | None = None

    def add_row(self, coeffs: dict, rhs: float, sign: float = 1.0):
        r = len(self.rhs)
        for c, v in coeffs.items():
            if v != 0.0:
                self.rows.append(r)
                self.cols.append(c)
                self.vals.append(sign * v)
        self.rhs.append(rhs)
        self._cache = None
        return r

    def copy(self) -> "_Triplets":
        return _Triplets(list(self.rows), list(self.cols), list(self.vals),
                         list(self.rhs))

    def matrix(self, n: int) -> sp.csc_matrix:
        if self._cache is None or self._cache[0] != n:
            m = sp.csc_matrix(
                (self.vals, (self.rows, self.cols)),
                shape=(len(self.rhs), n),
            )
            self._cache = (n, m)
        return self._cache[1]


class ConicProblem:
    """Mutable assembly, cheap row extension, immutable during solve."""

    def __init__(self):
        self.n = 0
        self._pobj_diag: dict[int, float] = {}
        self._pobj_off: list[tuple[int, int, float]] = []
        self._q: dict[int, float] = {}
        self._eq = _Triplets()
        self._ineq = _Triplets()
        self._socs: list[tuple[list[dict], list[float]]] = []
        self._psds: list[tuple[_Triplets, int]] = []
        self._frozen_cache = None

    # ------------------------------------------------------------------
    # variables / objective
    # ------------------------------------------------------------------
    def new_vars(self, count: int) -> range:
        start = self.n
        self.n += count
        self._frozen_cache = None
        return range(start, start + count)

    def add_quad_cost(self, var: int, weight: float):
        """Adds weight * x_var^2 to the objective."""
        self._pobj_diag[var] = self._pobj_diag.get(var, 0.0) + 2.0 * weight
        self._frozen_cache = None

    def add_linear_cost(self, var: int, weight: float):
        self._q[var] = self._q.get(var, 0.0) + weight
        self._frozen_cache = None

    # ------------------------------------------------------------------
    # constraints (affine: value = sum coeffs[v] * x_v)
    # ------------------------------------------------------------------
    def add_eq(self, coeffs: dict, rhs: float):
        self._eq.add_row(coeffs, rhs)
        self._frozen_cache = None

    def add_ineq(self, coeffs: dict, rhs: float):
        """sum coeffs[v] * x_v <= rhs."""
        self._ineq.add_row(coeffs, rhs)
        self._frozen_cache = None

    def add_soc(self, head: tuple[dict, float], tail: list[tuple[dict, float]]):
        """head >= || tail ||, each element an (coeffs, constant) pair."""
        exprs = [head] + list(tail)
        self._socs.append(([e[0] for e in exprs], [e[1] for e in exprs]))
        self._frozen_cache = None

    def add_psd(self, const: np.ndarray, terms: dict[int, np.ndarray]):
        """const + sum_v x_v * terms[v]  must be PSD (real symmetric)."""
        dim = const.shape[0]
        tri = _Triplets()
        tri.rhs = list(svec(const))
        for v, Cv in terms.items():
            col = svec(Cv)
            nz = np.nonzero(col)[0]
            tri.rows.extend(nz.tolist())
            tri.cols.extend([v] * len(nz))
            tri.vals.extend((-col[nz]).tolist())
        self._psds.append((tri, dim))
        self._frozen_cache = None

    def extended(self, ineq_rows: list[tuple[dict, float]]) -> "ConicProblem":
        """Copy sharing all sections except a fresh inequality section.

        The clone appends ``ineq_rows`` (each ``coeffs <= rhs``) to a copy
        of the inequality triplets; every other section is shared by
        reference and must not be mutated afterwards.  This is the cheap
        path for solving a family of problems differing only in a few
        linear inequality rows.
        """
        twin = ConicProblem()
        twin.n = self.n
        twin._pobj_diag = self._pobj_diag
        twin._pobj_off = self._pobj_off
        twin._q = self._q
        twin._eq = self._eq
        twin._socs = self._socs
        twin._psds = self._psds
        twin._ineq = self._ineq.copy()
        for coeffs, rhs in ineq_rows:
            twin._ineq.add_row(coeffs, rhs)
        return twin

    # ------------------------------------------------------------------
    # solve
    # ------------------------------------------------------------------
    def _assemble(self):
        if self._frozen_cache is not None:
            return self._frozen_cache
        n = self.n
        prows, pcols, pvals = [], [], []
        for v, w in self._pobj_diag.items():
            prows.append(v); pcols.append(v); pvals.append(w)
        for i, j, w in self._pobj_off:
            prows.append(min(i, j)); pcols.append(max(i, j)); pvals.append(w)
        P = sp.csc_matrix((pvals, (prows, pcols)), shape=(n, n))
        q = np.zeros(n)
        for v, w in self._q.items():
            q[v] = w

        blocks, rhs, cones = [], [], []
        if self._eq.rhs:
            blocks.append(self._eq.matrix(n))
            rhs.append(np.asarray(self._eq.rhs))
            cones.append(clarabel.ZeroConeT(len(self._eq.rhs)))
        if self._ineq.rhs:
            blocks.append(self._ineq.matrix(n))
            rhs.append(np.asarray(self._ineq.rhs))
            cones.append(clarabel.NonnegativeConeT(len(self._ineq.rhs)))
        for exprs, consts in self._socs:
            tri = _Triplets()
            for coeffs, c in zip(exprs, consts):
                tri.add_row(coeffs, c, sign=-1.0)
            blocks.append(tri.matrix(n))
            rhs.append(np.asarray(tri.rhs))
            cones.append(clarabel.SecondOrderConeT(len(consts)))
        for tri, dim in self._psds:
            blocks.append(tri.matrix(n))
            rhs.append(np.asarray(tri.rhs))
            cones.append(clarabel.PSDTriangleConeT(dim))

        if blocks:
            A = sp.vstack(blocks, format="csc")
            b = np.concatenate(rhs)
        else:
            A = sp.csc_matrix((0, n))
            b = np.zeros(0)
        self._frozen_cache = (P, q, A, b, cones)
        return self._frozen_cache

    def solve(self, tol: Tolerances = Tolerances()) -> "ConicSolution":
        P, q, A, b, cones = self._assemble()
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = tol.max_iters
        settings.tol_feas = tol.feasibility * 1e-1
        settings.tol_gap_rel = tol.rel_gap
        # A light static shift plus tight iterative refinement keeps the
        # KKT solves accurate when a PSD block is pushed onto the boundary
        # of the cone (nearly singular slack), which branch-and-bound cut
        # rows do routinely.
        settings.static_regularization_constant = 1e-9
        settings.iterative_refinement_abstol = 1e-14
        settings.iterative_refinement_reltol = 1e-14
        solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
        res = solver.solve()
        name = str(res.status)
        x = np.asarray(res.x) if res.x is not None else np.zeros(self.n)
        obj = 0.5 * float(x @ (P @ x)) + float(q @ x)
        obj_dual = float(res.obj_val_dual) if np.isfinite(res.obj_val_dual) \
            else obj

        if name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            return ConicSolution(Status.INFEASIBLE, x, math.inf, math.inf)
        if name in ("DualInfeasible", "AlmostDualInfeasible"):
            return ConicSolution(Status.UNBOUNDED, x, -math.inf, math.inf)

        resid = self.residual(x)
        if name == "MaxIterations":
            return ConicSolution(Status.MAX_ITERATIONS, x, obj, resid,
                                 obj_dual)
        if name not in ("Solved", "AlmostSolved"):
            return ConicSolution(Status.NUMERICAL_ERROR, x, obj, resid,
                                 obj_dual)

        status = Status.OPTIMAL if resid <= tol.feasibility else (
            Status.NUMERICAL_ERROR)
        return ConicSolution(status, x, obj, resid, obj_dual)

    def residual(self, x: np.ndarray) -> float:
        """Max violation of every constraint section at the point x."""
        worst = 0.0
        n = self.n
        if self._eq.rhs:
            r = self._eq.matrix(n) @ x - np.asarray(self._eq.rhs)
            worst = max(worst, float(np.max(np.abs(r))) if r.size else 0.0)
        if self._ineq.rhs:
            r = self._ineq.matrix(n) @ x - np.asarray(self._ineq.rhs)
            worst = max(worst, float(np.max(r)) if r.size else 0.0)
        for exprs, consts in self._socs:
            vals = [sum(cf.get(v, 0.0) * x[v] for v in cf) + c
                    for cf, c in zip(exprs, consts)]
            worst = max(worst, np.linalg.norm(vals[1:]) - vals[0])
        for tri, dim in self._psds:
            s = np.asarray(tri.rhs) - tri.matrix(n) @ x
            lam = np.linalg.eigvalsh(smat(s, dim))[0]
            worst = max(worst, -float(lam))
        return worst


@dataclass(frozen=True)
class ConicSolution:
    status: Status
    x: np.ndarray
    objective: float
    max_residual: float
    objective_dual: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    def lower_estimate(self) -> float:
        """Conservative objective estimate for use as a minimization bound.

        Takes the smaller of the primal and dual objective values so that
        a solve stopped just short of full accuracy still yields a usable
        (slightly loose, never optimistic) bound.
        """
        if math.isfinite(self.objective_dual):
            return min(self.objective, self.objective_dual)
        return self.objective


# ----------------------------------------------------------------------
# complex layer
# ----------------------------------------------------------------------
class ComplexProgram:
    """Complex-variable veneer over :class:`ConicProblem`.

    Complex scalars occupy two adjacent real slots (re, im).  Affine
    expressions are dicts mapping real-variable index -> complex
    coefficient plus a complex constant: value = const + sum coeff_v * x_v
    with x_v real.
    """

    def __init__(self):
        self.prob = ConicProblem()

    # -- variables ------------------------------------------------------
    def new_complex(self, count: int) -> list[tuple[int, int]]:
        idx = self.prob.new_vars(2 * count)
        return [(idx[2 * k], idx[2 * k + 1]) for k in range(count)]

    def new_real(self, count: int) -> list[int]:
        return list(self.prob.new_vars(count))

    # -- expression helpers ----------------------------------------------
    @staticmethod
    def lincomb(pairs, const: complex = 0.0) -> tuple[dict, complex]:
        """pairs: iterable of (complex coeff, (re_idx, im_idx)) terms."""
        d: dict[int, complex] = {}
        for coeff, (re_i, im_i) in pairs:
            if coeff == 0:
                continue
            d[re_i] = d.get(re_i, 0.0) + coeff
            d[im_i] = d.get(im_i, 0.0) + 1j * coeff
        return d, const

    @staticmethod
    def _re(expr: tuple[dict, complex]) -> tuple[dict, float]:
        d, c = expr
        return {v: cf.real for v, cf in d.items() if cf.real != 0.0}, c.real

    @staticmethod
    def _im(expr: tuple[dict, complex]) -> tuple[dict, float]:
        d, c = expr
        return {v: cf.imag for v, cf in d.items() if cf.imag != 0.0}, c.imag

    # -- constraints ------------------------------------------------------
    def add_re_eq(self, expr, rhs: float):
        coeffs, c = self._re(expr)
        self.prob.add_eq(coeffs, rhs - c)

    def add_im_eq(self, expr, rhs: float):
        coeffs, c = self._im(expr)
        self.prob.add_eq(coeffs, rhs - c)

    def add_re_ineq(self, expr, rhs: float, direction: int):
        """direction=+1: Re{expr} >= rhs;  -1: Re{expr} <= rhs."""
        coeffs, c = self._re(expr)
        if direction > 0:
            self.prob.add_ineq({v: -cf for v, cf in coeffs.items()}, c - rhs)
        else:
            self.prob.add_ineq(coeffs, rhs - c)

    def add_im_ineq(self, expr, rhs: float, direction: int):
        coeffs, c = self._im(expr)
        if direction > 0:
            self.prob.add_ineq({v: -cf for v, cf in coeffs.items()}, c - rhs)
        else:
            self.prob.add_ineq(coeffs, rhs - c)

    def add_soc(self, head, tail):
        """Re{head} >= || [members of tail] || with complex tail entries
        contributing their real and imaginary parts as separate rows."""
        rows = []
        for e in tail:
            rows.append(self._re(e))
            rows.append(self._im(e))
        self.prob.add_soc(self._re(head), rows)

    def add_abs_cost(self, cvars, weight: float = 1.0):
        """Adds weight * sum |z|^2 over complex vars to the objective."""
        for re_i, im_i in cvars:
            self.prob.add_quad_cost(re_i, weight)
            self.prob.add_quad_cost(im_i, weight)

    # -- Hermitian PSD blocks ---------------------------------------------
    def add_hermitian_psd(self, entries: dict[tuple[int, int], tuple],
                          dim: int):
        """Declare H (dim x dim, Hermitian) PSD from upper-triangle entries.

        entries[(i, j)] with i <= j is an affine complex expression
        (dict var -> complex coeff, complex const); diagonal entries must
        be real-valued affine.  The block is lowered through the real
        symmetric embedding of size 2*dim.
        """
        q = dim
        C0 = np.zeros((q, q), dtype=complex)
        per_var: dict[int, np.ndarray] = {}
        for (i, j), (coeffs, const) in entries.items():
            if i == j:
                C0[i, i] += const.real
            else:
                C0[i, j] += const
                C0[j, i] += np.conj(const)
            for v, cf in coeffs.items():
                Cv = per_var.setdefault(v, np.zeros((q, q), dtype=complex))
                if i == j:
                    Cv[i, i] += cf.real
                else:
                    Cv[i, j] += cf
                    Cv[j, i] += np.conj(cf)
        const_emb = hermitian_embed(C0)
        terms = {v: hermitian_embed(Cv) for v, Cv in per_var.items()}
        self.prob.add_psd(const_emb, terms)

    # -- solve / extract ----------------------------------------------------
    def solve(self, tol: Tolerances = Tolerances()) -> ConicSolution:
        return self.prob.solve(tol)

    @staticmethod
    def value(sol: ConicSolution, cvar: tuple[int, int]) -> complex:
        return complex(sol.x[cvar[0]], sol.x[cvar[1]])

    def values(self, sol: ConicSolution, cvars) -> np.ndarray:
        return np.array([self.value(sol, cv) for cv in cvars])
