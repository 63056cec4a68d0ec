"""Tests for T0 bounds, recovery plans, and exact coefficient recovery."""

import random
from fractions import Fraction

import pytest
from mpmath import mp

from cmforge.errors import InternalInvariantError, InvalidParameters, \
    PrecisionEscalation
from cmforge.genusfield import IMAG_PART, REAL_PART
from cmforge.modfns import InvariantKind
from cmforge.recover import bound_T0_heuristic, bound_T0_rigorous, coset_sums, \
    make_plan, recover_coords, recovery_matrix, solve_integer_system, \
    _det_bareiss

PLANS = {}


def plan_for(D):
    if D not in PLANS:
        PLANS[D] = make_plan(D)
    return PLANS[D]


def evaluate(coords, elems, prec, perturb=0):
    with mp.workprec(prec):
        val = sum(c * e.numeric(prec) for c, e in zip(coords, elems))
        return +(val + perturb)


def test_coset_sums_examples():
    # h(-40) = 2 with forms (1,0,10) and (2,0,5) in distinct cosets
    sums = coset_sums(-40)
    assert len(sums) == 2
    vals = sorted(float(v) for v in sums.values())
    assert vals == [0.5, 1.0]
    assert coset_sums(-3) == {(1,): 1}


def test_t0_heuristic_j():
    T0 = bound_T0_heuristic(-40, InvariantKind.j())
    with mp.workprec(64):
        # max coset sum is 1, so ln(T0 / 2^8) = pi * sqrt(40)
        assert abs(mp.log(mp.mpf(T0) / 256) - mp.pi * mp.sqrt(40)) < 1e-12
    # bounds the conjugates of the one divisor coefficient: the roots of
    # x^2 - 425692800x + 9103145472000 are about 4.26e8 and 2.14e4
    assert T0 > 425692800


def test_t0_heuristic_gamma2():
    T0 = bound_T0_heuristic(-40, InvariantKind.gamma2())
    with mp.workprec(64):
        assert abs(mp.log(mp.mpf(T0) / 256) - mp.pi * mp.sqrt(40) / 3) < 1e-12
    # roots of x^2 - 780x + 20880 are ~752.6 and ~27.4
    assert T0 > 780


def test_t0_rigorous():
    assert bound_T0_rigorous(-40) > bound_T0_heuristic(-40)
    with mp.workprec(64):
        # D = -3: N = 1, all ln N terms vanish
        expect = mp.e ** mp.mpf("29.036")
        assert abs(mp.log(mp.mpf(bound_T0_rigorous(-3))) - (17.442 + 11.594)) < 1e-9
    last = 0
    for D in (-3, -40, -84, -420, -1000):
        cur = bound_T0_rigorous(D)
        assert cur > last
        last = cur


def test_plan_degenerate_t1():
    plan = plan_for(-3)
    assert plan.N0 == 1
    assert plan.run_real.A == [1] and plan.run_imag.A == [1]
    assert plan.epsilon < 0.25
    with mp.workprec(96):
        want = int(mp.ceil(mp.log(2 * mp.mpf(plan.T0) / plan.epsilon, 2))) + 64
    assert plan.float_bits == want


@pytest.mark.parametrize("D", [-40, -84, -120])
def test_plan_invariants_independent_check(D):
    plan = plan_for(D)
    basis = plan.mpair_real.basis
    m = basis.m
    prec = 224
    with mp.workprec(prec):
        T_eff = 2 * mp.mpf(plan.T0)
        cap = mp.sqrt(abs(basis.d)) ** m
        for side in (REAL_PART, IMAG_PART):
            mpair, sc, run = plan.mpair(side), plan.sc(side), plan.run(side)
            norm = plan.norm_elem(side)
            Z = sum(a * w.numeric_real(prec)
                    for a, w in zip(run.A, mpair.omega_star))
            mid = abs(mpair.mid.numeric_real(prec))
            for X in sc.X_set:
                s = sum(abs(mpair.mvals[lam].numeric_real(prec))
                        * abs(X.tau(lam).numeric(prec))
                        / abs(norm.tau(lam).numeric(prec))
                        for lam in range(1, m))
                assert Z > (4 * s * cap * T_eff) ** (m - 1)
                eps_cap = abs(norm.numeric(prec)) \
                    / (4 * mid * abs(X.numeric(prec)) * Z)
                assert plan.epsilon < eps_cap


@pytest.mark.parametrize("D", [-40, -84, -120])
def test_round_trip_both_sides(D):
    plan = plan_for(D)
    basis = plan.mpair_real.basis
    m = basis.m
    rng = random.Random(D)
    prec = plan.float_bits + 16
    for trial in range(40):
        b = [rng.randint(-10 ** 6, 10 ** 6) for _ in range(m)]
        bp = [rng.randint(-10 ** 6, 10 ** 6) for _ in range(m)]
        with mp.workprec(prec):
            shift = mp.mpf(plan.epsilon) * (2 * rng.random() - 1) * mp.mpf("0.99")
            g_re = evaluate(b, basis.beta, prec, shift)
            g_im = evaluate(bp, basis.beta_star, prec, mp.mpc(0, shift))
        assert recover_coords(g_re, plan, REAL_PART) == b
        assert recover_coords(g_im, plan, IMAG_PART) == bp


def test_round_trip_stays_within_t0():
    # the random vectors used above really do satisfy the conjugate bound
    plan = plan_for(-84)
    basis = plan.mpair_real.basis
    rng = random.Random(1)
    with mp.workprec(160):
        for _ in range(20):
            b = [rng.randint(-10 ** 6, 10 ** 6) for _ in range(basis.m)]
            for lam in range(basis.m):
                v = sum(c * e.tau(lam).numeric(160)
                        for c, e in zip(b, basis.beta))
                assert abs(v) <= mp.mpf(plan.T0)


def test_gamma_zero_gives_zero_vector():
    plan = plan_for(-84)
    assert recover_coords(mp.mpf(0), plan, REAL_PART) == [0] * 4
    assert recover_coords(mp.mpf(0), plan, IMAG_PART) == [0] * 4


def test_t1_recovery_is_integer_rounding():
    plan = plan_for(-3)
    assert recover_coords(mp.mpf(14), plan, REAL_PART) == [14]
    assert recover_coords(mp.mpf("13.93"), plan, REAL_PART) == [14]
    with mp.workprec(96):
        g = mp.mpc(0, 5 * mp.sqrt(3))   # 5 * sqrt(d), d = -3
        assert recover_coords(g, plan, IMAG_PART) == [5]


def test_bigger_n0_still_recovers():
    base = plan_for(-40)
    plan = make_plan(-40, n0_min=base.N0 * 10 ** 6)
    assert plan.N0 >= base.N0 * 10 ** 6
    basis = plan.mpair_real.basis
    rng = random.Random(2)
    prec = plan.float_bits + 16
    for _ in range(10):
        b = [rng.randint(-10 ** 6, 10 ** 6) for _ in range(basis.m)]
        g = evaluate(b, basis.beta, prec)
        assert recover_coords(g, plan, REAL_PART) == b


def test_wrong_side_value_escalates():
    plan = plan_for(-40)
    with pytest.raises(PrecisionEscalation):
        recover_coords(mp.mpc(1, 10), plan, REAL_PART)


def test_big_perturbation_escalates():
    # shifting gamma so that the eta = 0 row lands half way between
    # integers must trip the 0.25 residual guard
    plan = plan_for(-40)
    basis = plan.mpair_real.basis
    prec = plan.float_bits + 16
    b = [123456, -654321]
    with mp.workprec(prec):
        mid = plan.mpair_real.mid.numeric_real(prec)
        Z = sum(a * w.numeric_real(prec)
                for a, w in zip(plan.run_real.A, plan.mpair_real.omega_star))
        norm = basis.beta[0].numeric_real(prec)
        g = evaluate(b, basis.beta, prec, norm / (2 * mid * Z))
    with pytest.raises(PrecisionEscalation):
        recover_coords(g, plan, REAL_PART)


def test_invalid_side_rejected():
    plan = plan_for(-40)
    with pytest.raises(InvalidParameters):
        recover_coords(mp.mpf(0), plan, "sideways")


def test_plan_is_immutable():
    plan = plan_for(-40)
    with pytest.raises(Exception):
        plan.N0 = 5


def _det_fractions(M):
    n = len(M)
    M = [[Fraction(v) for v in row] for row in M]
    det = Fraction(1)
    for k in range(n):
        piv = next((i for i in range(k, n) if M[i][k]), None)
        if piv is None:
            return Fraction(0)
        if piv != k:
            M[k], M[piv] = M[piv], M[k]
            det = -det
        det *= M[k][k]
        inv = 1 / M[k][k]
        for i in range(k + 1, n):
            f = M[i][k] * inv
            for j in range(k, n):
                M[i][j] -= f * M[k][j]
    return det


def test_bareiss_determinant_matches_gauss():
    rng = random.Random(3)
    for _ in range(60):
        n = rng.randint(1, 6)
        M = [[rng.randint(-99, 99) for _ in range(n)] for _ in range(n)]
        assert _det_bareiss(M) == _det_fractions(M)
    # a few singular ones
    assert _det_bareiss([[1, 2], [2, 4]]) == 0
    assert _det_bareiss([[0, 0], [1, 1]]) == 0


def test_solve_integer_system():
    assert solve_integer_system([[3, 1], [1, 2]], [5, 0]) == [2, -1]
    with pytest.raises(InternalInvariantError):
        solve_integer_system([[1, 2], [2, 4]], [1, 2])
    with pytest.raises(PrecisionEscalation):
        solve_integer_system([[2, 0], [0, 2]], [1, 0])


def test_recovery_matrix_nonsingular():
    for D in (-40, -84, -120):
        plan = plan_for(D)
        for side in (REAL_PART, IMAG_PART):
            M = recovery_matrix(plan.run(side), plan.sc(side))
            assert _det_bareiss(M) != 0
