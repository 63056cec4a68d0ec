"""Turning float approximations of divisor coefficients back into integers.

A coefficient z of the genus-field divisor satisfies 2*Re(z) = sum b_xi
beta_xi and 2i*Im(z) = sum b'_xi beta*_xi with integer b, b'.  Given gamma
within epsilon of the true value and the a-priori conjugate bound T0, the
numbers M(Id)*Z*gamma*X_eta/beta_0 round to the integers
sum_mu A_mu B_{mu,eta}, and the linear system

    r_eta = sum_xi (sum_mu A_mu x_{mu,xi,eta}) b_xi

is then solved exactly over the integers.  The plan object fixes T0, the
approximation threshold N0, epsilon and the working precision so that the
rounding is provably correct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from mpmath import mp

from .approx import ApproxRun, run_approx
from .arith import Discriminant
from .errors import InternalInvariantError, InvalidParameters, PrecisionEscalation
from .forms import enumerate_reduced, phi_class
from .genusfield import IMAG_PART, REAL_PART, build_basis, build_mpair, \
    structure_constants
from .modfns import InvariantKind

T0_SAFETY_BITS = 8
FLOAT_BITS_MARGIN = 64

# rigorous coefficient bound constants, N = sqrt(|D|/3)
_C1 = 5.441
_C2 = 18.587
_C3 = 17.442
_C4 = 11.594


def coset_sums(D, forms=None):
    """Sum of 1/A over the reduced forms in each phi-coset."""
    d = Discriminant.from_D(D)
    if forms is None:
        forms = enumerate_reduced(D)
    sums = {}
    for f in forms:
        lab = phi_class(f, d)
        sums[lab] = sums.get(lab, 0) + mp.mpf(1) / f.A
    return sums


def bound_T0_heuristic(D, kind=None, forms=None):
    """exp(ratio * pi * sqrt(|D|) * max coset sum), padded by 2^8.

    The coefficient of the divisor polynomial is (up to the invariant's
    height ratio) a product of theta-values whose logs are at most
    pi*sqrt(|D|)/A each; only forms sharing one phi label contribute.
    """
    if kind is None:
        kind = InvariantKind.j()
    d = Discriminant.from_D(D)
    ratio = kind.height_ratio(d)
    with mp.workprec(96):
        worst = max(coset_sums(D, forms).values())
        ln_t0 = mp.mpf(ratio.numerator) / ratio.denominator * mp.pi \
            * mp.sqrt(abs(D)) * worst
        return +(mp.e ** ln_t0 * 2 ** T0_SAFETY_BITS)


def bound_T0_rigorous(D):
    """Unconditional coefficient bound exp(c1*N*ln^2 N + c2*N*ln N + c3*N
    + c1*ln N + c4) with N = sqrt(|D|/3)."""
    with mp.workprec(96):
        N = mp.sqrt(mp.mpf(abs(D)) / 3)
        ln = mp.log(N)
        return +mp.e ** (_C1 * N * ln ** 2 + _C2 * N * ln + _C3 * N
                         + _C1 * ln + _C4)


@dataclass(frozen=True)
class RecoveryPlan:
    d: Discriminant
    T0: object
    N0: int
    epsilon: object
    float_bits: int
    mpair_real: object
    mpair_imag: object
    run_real: ApproxRun
    run_imag: ApproxRun
    sc_real: object
    sc_imag: object

    def mpair(self, side):
        return self.mpair_real if side == REAL_PART else self.mpair_imag

    def run(self, side):
        return self.run_real if side == REAL_PART else self.run_imag

    def sc(self, side):
        return self.sc_real if side == REAL_PART else self.sc_imag

    def norm_elem(self, side):
        basis = self.mpair_real.basis
        return basis.beta[0] if side == REAL_PART else basis.beta_star[0]


def _side_threshold(mpair, sc, T_eff, prec=160):
    """Required Z from the rounding analysis, with the conjugate factor.

    The quantity being bounded is tau_lam(sum b omega) * tau_lam(X_eta) =
    tau_lam(sum b beta)/tau_lam(beta_norm) * tau_lam(X_eta), so each term
    carries 1/|tau_lam(beta_norm)|.
    """
    basis = mpair.basis
    m = basis.m
    if m == 1:
        return mp.mpf(0), mp.mpf(0)
    norm = basis.beta[0] if mpair.variant == REAL_PART else basis.beta_star[0]
    with mp.workprec(prec):
        delta_cap = mp.sqrt(abs(basis.d)) ** m
        mv = [abs(v.numeric_real(prec)) for v in mpair.mvals]
        C = +sum(mv[1:])
        z_req = mp.mpf(0)
        for X in sc.X_set:
            s = mp.mpf(0)
            for lam in range(1, m):
                tx = abs(X.tau(lam).numeric(prec))
                tn = abs(norm.tau(lam).numeric(prec))
                s += mv[lam] * tx / tn
            z_req = max(z_req, (4 * s * delta_cap * T_eff) ** (m - 1))
        return +z_req, +C


def _side_epsilon(mpair, sc, run, prec=160):
    """epsilon < (1/4) |beta_norm| / (|M(Id) X_eta| Z) over all eta."""
    basis = mpair.basis
    norm = basis.beta[0] if mpair.variant == REAL_PART else basis.beta_star[0]
    with mp.workprec(prec):
        Z = run.z_value()
        mid = abs(mpair.mid.numeric_real(prec))
        best = mp.inf
        for X in sc.X_set:
            xv = abs(X.numeric(prec))
            best = min(best, abs(norm.numeric(prec)) / (4 * mid * xv * Z))
        return +best


def make_plan(D, kind=None, T0=None, n0_min=1):
    """Choose N0, run both approximation sides, fix epsilon and precision."""
    d = Discriminant.from_D(D)
    basis = build_basis(d)
    mp_real = build_mpair(basis, REAL_PART)
    mp_imag = build_mpair(basis, IMAG_PART)
    sc_real = structure_constants(mp_real, dual=False)
    sc_imag = structure_constants(mp_imag, dual=False)
    if T0 is None:
        T0 = bound_T0_heuristic(D, kind)
    with mp.workprec(160):
        T_eff = 2 * mp.mpf(T0)   # recovered sums are 2*Re z and 2i*Im z
        delta_cap = mp.sqrt(abs(basis.d)) ** basis.m
        N0 = int(n0_min)
        if basis.m > 1:
            for mpair, sc in ((mp_real, sc_real), (mp_imag, sc_imag)):
                z_req, C = _side_threshold(mpair, sc, T_eff)
                mid = abs(mpair.mid.numeric_real(160))
                head = 1 + mp.mpf(2) ** -40   # so re-verification can't miss by an ulp
                need = int(mp.floor(mid * z_req * head + C * delta_cap)) + 2
                N0 = max(N0, need)
    run_real = run_approx(d, mp_real, c_tensor=None, N0=N0)
    run_imag = run_approx(d, mp_imag, c_tensor=None, N0=N0)
    eps = min(_side_epsilon(mp_real, sc_real, run_real),
              _side_epsilon(mp_imag, sc_imag, run_imag))
    with mp.workprec(160):
        eps = +(eps / 2)
        float_bits = int(mp.ceil(mp.log(T_eff / eps, 2))) + FLOAT_BITS_MARGIN
    plan = RecoveryPlan(d=d, T0=T0, N0=N0, epsilon=eps, float_bits=float_bits,
                        mpair_real=mp_real, mpair_imag=mp_imag,
                        run_real=run_real, run_imag=run_imag,
                        sc_real=sc_real, sc_imag=sc_imag)
    _check_plan(plan)
    return plan


def _check_plan(plan):
    """The two plan invariants, verified at construction."""
    with mp.workprec(192):
        T_eff = 2 * mp.mpf(plan.T0)
        for side in (REAL_PART, IMAG_PART):
            mpair, sc, run = plan.mpair(side), plan.sc(side), plan.run(side)
            if plan.d.m > 1:
                z_req, _ = _side_threshold(mpair, sc, T_eff, 192)
                Z = run.z_value()
                if not Z > z_req:
                    raise InternalInvariantError(
                        f"accuracy threshold not reached on the {side} side")
            if not plan.epsilon < _side_epsilon(mpair, sc, run, 192):
                raise InternalInvariantError(
                    f"epsilon too large on the {side} side")


def _det_bareiss(M):
    """Fraction-free determinant; all intermediate divisions are exact."""
    M = [list(row) for row in M]
    n = len(M)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k]:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = M[i][j] * M[k][k] - M[i][k] * M[k][j]
                q, rem = divmod(num, prev)
                assert rem == 0
                M[i][j] = q
            M[i][k] = 0
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def solve_integer_system(M, r):
    """Solve M b = r for integer b; M integer and nonsingular."""
    n = len(M)
    det = _det_bareiss(M)
    if det == 0:
        raise InternalInvariantError("singular recovery matrix")
    b = []
    for xi in range(n):
        Mx = [[r[e] if j == xi else M[e][j] for j in range(n)] for e in range(n)]
        q, rem = divmod(_det_bareiss(Mx), det)
        if rem:
            raise PrecisionEscalation(
                "recovered right-hand side is inconsistent; need more precision")
        b.append(q)
    return b


def recovery_matrix(run, sc):
    """M_{eta,xi} = sum_mu A_mu x_{mu,xi,eta}."""
    m = len(run.A)
    T = sc.tensor
    return [[sum(run.A[mu] * T[eta][xi][mu] for mu in range(m))
             for xi in range(m)] for eta in range(m)]


def recover_coords(gamma, plan, side):
    """Integer coordinates b with sum b_xi beta_xi ~ gamma (real side) or
    sum b'_xi beta*_xi ~ gamma (imaginary side)."""
    if side not in (REAL_PART, IMAG_PART):
        raise InvalidParameters(f"unknown recovery side {side!r}")
    mpair, sc, run = plan.mpair(side), plan.sc(side), plan.run(side)
    basis = mpair.basis
    m = basis.m
    prec = plan.float_bits + FLOAT_BITS_MARGIN
    with mp.workprec(prec):
        norm = plan.norm_elem(side).numeric(prec)
        ratio = mp.mpc(gamma) / norm
        if abs(mp.im(ratio)) > (1 + abs(mp.re(ratio))) * mp.mpf(2) ** -32:
            raise PrecisionEscalation(
                f"approximate value is not {side} after normalization")
        ratio = mp.re(ratio)
        mid = mpair.mid.numeric_real(prec)
        Z = +sum(a * w.numeric_real(prec) for a, w in zip(run.A, mpair.omega_star))
        rhs = []
        for X in sc.X_set:
            v = mid * Z * ratio * X.numeric_real(prec)
            r = int(mp.nint(v))
            if abs(v - r) >= 0.25:
                raise PrecisionEscalation(
                    f"rounding residual {mp.nstr(abs(v - r), 5)} at working "
                    f"precision {plan.float_bits}")
            rhs.append(r)
    return solve_integer_system(recovery_matrix(run, sc), rhs)
