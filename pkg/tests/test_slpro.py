"""Joint rotation + precoding optimizer: cuts, relaxation, branch-and-bound."""

import math

import numpy as np
import pytest

from slprecode import datavec, modem, slp, slpro
from slprecode.conic import Status, Tolerances
from tests.conftest import GAMMA_REF, SIGMA_REF, random_channel


# ----------------------------------------------------------------------
# argument cuts
# ----------------------------------------------------------------------
def test_cut_rejects_wide_arcs():
    with pytest.raises(ValueError):
        slpro.argument_cut(0.0, math.pi + 0.1)
    with pytest.raises(ValueError):
        slpro.argument_cut(1.0, 0.5)


def test_cut_contains_every_arc_point():
    """All unit-circle points of the arc satisfy the three half-planes."""
    rng = np.random.default_rng(30)
    for _ in range(10_000):
        l = rng.uniform(-2 * math.pi, 2 * math.pi)
        w = rng.uniform(0.0, math.pi)
        cut = slpro.argument_cut(l, l + w)
        phi = rng.uniform(l, l + w)
        assert slpro.cut_contains(cut, np.exp(1j * phi), tol=1e-9)


def test_cut_excludes_antipode_and_interior():
    cut = slpro.argument_cut(0.2, 0.9)
    mid = 0.5 * (0.2 + 0.9)
    assert not slpro.cut_contains(cut, np.exp(1j * (mid + math.pi)))
    # points well inside the chord are excluded too (|c| too small)
    assert not slpro.cut_contains(cut, 0.3 * np.exp(1j * mid))
    # ... but the chord allows |c| >= cos(width / 2) along the bisector
    r_min = math.cos(0.5 * (0.9 - 0.2))
    assert slpro.cut_contains(cut, (r_min + 1e-9) * np.exp(1j * mid))
    assert not slpro.cut_contains(cut, (r_min - 1e-6) * np.exp(1j * mid))


def test_cut_rows_match_membership_test():
    """The LP rows and cut_contains agree on random points."""
    from slprecode.conic import ConicProblem
    rng = np.random.default_rng(31)
    cut = slpro.argument_cut(-0.4, 1.1)
    for _ in range(200):
        c = rng.uniform(-1.5, 1.5) + 1j * rng.uniform(-1.5, 1.5)
        rows = slpro.cut_rows(cut, 0, 1)
        x = np.array([c.real, c.imag])
        row_ok = all(
            sum(cf * x[v] for v, cf in coeffs.items()) <= rhs + 1e-12
            for coeffs, rhs in rows
        )
        assert row_ok == slpro.cut_contains(cut, c)


def test_degenerate_cut_pins_point():
    """A zero-width arc [l, l] admits exactly e^{il} on the unit circle."""
    l = 0.77
    cut = slpro.argument_cut(l, l)
    assert slpro.cut_contains(cut, np.exp(1j * l), tol=1e-12)
    assert not slpro.cut_contains(cut, np.exp(1j * (l + 1e-3)))
    assert not slpro.cut_contains(cut, 0.999 * np.exp(1j * l))


# ----------------------------------------------------------------------
# relaxation nodes
# ----------------------------------------------------------------------
@pytest.fixture(scope="module")
def qpsk_pair():
    qpsk = modem.constellation_from_name("qpsk")
    return [qpsk, qpsk]


@pytest.fixture(scope="module")
def relax_ref(qpsk_pair):
    H = np.array([[-0.4965 + 0.0618j, 0.5403 + 1.0261j],
                  [-0.3680 + 0.0010j, 0.2111 + 0.8027j]])
    dset = datavec.reduced_set(qpsk_pair)
    return H, dset, slpro.RotationRelaxation(H, dset, GAMMA_REF, SIGMA_REF)


def test_root_node_lower_bounds_fixed_rotations(relax_ref, qpsk_pair):
    """Any fixed rotation's power dominates the root relaxation value."""
    H, dset, relax = relax_ref
    root = relax.solve_node({1: (0.0, math.pi)})
    assert root.status in (Status.OPTIMAL, Status.MAX_ITERATIONS,
                           Status.NUMERICAL_ERROR)
    for phi in (0.0, 0.4, 1.0, 2.0):
        sol = slpro.upper_bound(H, dset, GAMMA_REF, SIGMA_REF,
                                np.array([0.0, phi]))
        assert root.value <= sol.average_power + 1e-6


def test_degenerate_interval_matches_fixed_rotation(relax_ref):
    """Pinning the arc to a point reproduces the fixed-rotation power."""
    H, dset, relax = relax_ref
    phi = 1.1
    node = relax.solve_node({1: (phi, phi)})
    fixed = slp.solve_block(H, dset, GAMMA_REF, SIGMA_REF,
                            rotation=np.exp(1j * np.array([0.0, phi])))
    assert node.value == pytest.approx(fixed.average_power, rel=1e-5)
    # the pinned Gram entry sits at e^{i phi}
    assert node.T[0, 1] == pytest.approx(np.exp(1j * phi), abs=1e-5)


def test_node_gram_unit_diagonal(relax_ref):
    _, _, relax = relax_ref
    node = relax.solve_node({1: (0.3, 0.9)})
    np.testing.assert_allclose(np.diag(node.T).real, 1.0, atol=1e-6)
    assert abs(node.T[0, 1]) <= 1.0 + 1e-6


def test_narrower_arcs_never_lower_the_bound(relax_ref):
    _, _, relax = relax_ref
    wide = relax.solve_node({1: (0.0, 2.0)})
    narrow = relax.solve_node({1: (0.5, 1.5)})
    assert narrow.value >= wide.value - 1e-7


def test_extract_candidate_on_exact_rank_one():
    """Synthetic rank-1 blocks give back the planted phases exactly."""
    rng = np.random.default_rng(32)
    M, K = 3, 3
    x = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    phi_true = np.array([0.0, 0.8, -1.9])
    u = np.exp(1j * phi_true)
    P = np.outer(x, x.conj())
    F = np.outer(x, u)          # column k carries x * u_k
    phi, alpha_abs, defect = slpro.extract_candidate(P, F)
    np.testing.assert_allclose(alpha_abs, 1.0, atol=1e-9)
    assert defect == pytest.approx(0.0, abs=1e-9)
    delta = np.mod(phi - phi_true + math.pi, 2 * math.pi) - math.pi
    np.testing.assert_allclose(delta, 0.0, atol=1e-9)


# ----------------------------------------------------------------------
# the full optimizer
# ----------------------------------------------------------------------
def test_single_user_is_trivial(qpsk_pair):
    rng = np.random.default_rng(33)
    H = random_channel(rng, 1, 2)
    qpsk = qpsk_pair[0]
    res = slpro.optimize_rotations(H, [qpsk], GAMMA_REF, SIGMA_REF)
    base = slp.solve_block(H, datavec.enumerate_all([qpsk]), GAMMA_REF,
                           SIGMA_REF)
    assert res.certified
    assert res.theta.shape == (1,)
    assert res.theta[0] == 0.0
    assert res.incumbent == pytest.approx(base.average_power, rel=1e-6)


def test_bound_sandwich_and_improvement(qpsk_pair):
    """L <= U <= unrotated power, with certified gap below eps."""
    rng = np.random.default_rng(34)
    H = random_channel(rng, 2, 2)
    res = slpro.optimize_rotations(H, qpsk_pair, GAMMA_REF, SIGMA_REF,
                                   eps=1e-3, node_cap=600)
    plain = slp.solve_block(H, datavec.enumerate_all(qpsk_pair), GAMMA_REF,
                            SIGMA_REF)
    assert res.lower_bound <= res.incumbent + 1e-9
    assert res.incumbent <= plain.average_power + 1e-9
    if res.certified:
        assert res.gap <= 1e-3


def test_outputs_meet_regions_after_rotation(qpsk_pair):
    rng = np.random.default_rng(35)
    H = random_channel(rng, 2, 2)
    res = slpro.optimize_rotations(H, qpsk_pair, GAMMA_REF, SIGMA_REF,
                                   eps=1e-2, node_cap=200)
    det = slp.build_constraints(qpsk_pair, res.vectors, GAMMA_REF, SIGMA_REF)
    u = np.exp(-1j * res.theta)
    S = u[:, None] * (H @ res.outputs.T)
    assert det.residual(S) <= 1e-6


def test_symmetry_toggle_agrees(qpsk_pair):
    rng = np.random.default_rng(36)
    H = random_channel(rng, 2, 2)
    kw = dict(eps=1e-3, node_cap=300)
    a = slpro.optimize_rotations(H, qpsk_pair, GAMMA_REF, SIGMA_REF,
                                 use_symmetry=True, **kw)
    b = slpro.optimize_rotations(H, qpsk_pair, GAMMA_REF, SIGMA_REF,
                                 use_symmetry=False, **kw)
    assert a.incumbent == pytest.approx(b.incumbent, rel=1e-4)


@pytest.mark.slow
def test_reference_channel_certified_small_gap(qpsk_pair):
    """Certifies a 1e-3 gap on the nearly colinear reference channel."""
    H = np.array([[-0.4965 + 0.0618j, 0.5403 + 1.0261j],
                  [-0.3680 + 0.0010j, 0.2111 + 0.8027j]])
    res = slpro.optimize_rotations(H, qpsk_pair, GAMMA_REF, SIGMA_REF,
                                   eps=1e-3, node_cap=5000)
    assert res.certified
    assert res.gap <= 1e-3
    assert res.incumbent_db == pytest.approx(35.256, abs=0.02)
    # theta_1 is the gauge; theta_2 lands at one of the four symmetric optima
    step = np.mod(res.theta[1], math.pi / 2)
    assert min(step, math.pi / 2 - step) == pytest.approx(
        math.radians(12.057), abs=0.05)


def test_node_cap_returns_uncertified(qpsk_pair):
    H = np.array([[-0.4965 + 0.0618j, 0.5403 + 1.0261j],
                  [-0.3680 + 0.0010j, 0.2111 + 0.8027j]])
    res = slpro.optimize_rotations(H, qpsk_pair, GAMMA_REF, SIGMA_REF,
                                   eps=1e-12, node_cap=10)
    assert not res.certified
    assert res.gap > 1e-12
    assert res.lower_bound <= res.incumbent
