"""Exact arithmetic in multiquadratic fields Q(sqrt(q1),...,sqrt(qt)).

An element is a rational combination of products of square roots of the
prime-power factors q_i of a discriminant.  We store it as a map
{subset bitmask -> Fraction}, where the basis vector for a mask S is the
*product* of principal square roots prod_{i in S} sqrt(q_i) (positive
real for q_i > 0, i*sqrt(|q_i|) for q_i < 0).  In particular the
distinguished root of the discriminant, sqrt_d, is the product
sqrt(q_1)...sqrt(q_t); every sign convention below is anchored to that.

On top of raw field arithmetic this module builds explicit Z-bases
(beta, beta_star) of the real and pure-imaginary parts of the ring of
integers, the sign-flip automorphisms tau, the dual systems
(omega, omega_star, M-values) driving coefficient recovery, and the
integer structure-constant tensors used by the approximation loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from mpmath import mp

from .errors import InternalInvariantError, InvalidParameters

CASE_ALL_ODD = "ALL_ODD"
CASE_PLUS8 = "EVEN_8_POSITIVE"
CASE_MIXED = "EVEN_NEG_MIXED"
CASE_ALLPOS = "EVEN_NEG_ALLPOS"

REAL_PART = "REAL_PART"
IMAG_PART = "IMAG_PART"


def _mask_bits(mask):
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def _popcount(n):
    return bin(n).count("1")


def _lam_mask(lam, nbits):
    """Accept an automorphism label as an int bitmask or a 0/1 sequence."""
    if isinstance(lam, int):
        m = lam
    else:
        m = 0
        for j, b in enumerate(lam):
            if b:
                m |= 1 << j
    if not 0 <= m < (1 << nbits):
        raise InvalidParameters(f"automorphism label {lam!r} out of range for {nbits} generators")
    return m


class GFElem:
    """One element of Q(sqrt(q1),...,sqrt(qt)) with exact rational coords."""

    __slots__ = ("qstars", "c")

    def __init__(self, qstars, coeffs=None):
        self.qstars = tuple(qstars)
        c = {}
        if coeffs:
            top = 1 << len(self.qstars)
            for mask, v in coeffs.items():
                v = v if isinstance(v, Fraction) else Fraction(v)
                if v != 0:
                    assert 0 <= mask < top
                    c[mask] = v
        self.c = c

    # -- helpers ------------------------------------------------------

    def _check(self, other):
        if self.qstars != other.qstars:
            raise InvalidParameters(f"mixed fields: {self.qstars} vs {other.qstars}")

    @property
    def neg_mask(self):
        m = 0
        for i, q in enumerate(self.qstars):
            if q < 0:
                m |= 1 << i
        return m

    def is_zero(self):
        return not self.c

    def is_rational(self):
        return all(m == 0 for m in self.c)

    def as_fraction(self):
        if not self.is_rational():
            raise InternalInvariantError(f"not rational: {self!r}")
        return self.c.get(0, Fraction(0))

    def is_real(self):
        neg = self.neg_mask
        return all(_popcount(m & neg) % 2 == 0 for m in self.c)

    def is_imag(self):
        neg = self.neg_mask
        return all(_popcount(m & neg) % 2 == 1 for m in self.c)

    # -- ring ops -----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = GFElem(self.qstars, {0: other})
        self._check(other)
        out = dict(self.c)
        for m, co in other.c.items():
            out[m] = out.get(m, Fraction(0)) + co
        return GFElem(self.qstars, out)

    __radd__ = __add__

    def __neg__(self):
        return GFElem(self.qstars, {m: -co for m, co in self.c.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, GFElem) else -Fraction(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return GFElem(self.qstars, {m: co * other for m, co in self.c.items()})
        self._check(other)
        out = {}
        for ma, ca in self.c.items():
            for mb, cb in other.c.items():
                f = ca * cb
                for i in _mask_bits(ma & mb):
                    f *= self.qstars[i]
                key = ma ^ mb
                if key in out:
                    out[key] += f
                else:
                    out[key] = f
        return GFElem(self.qstars, out)

    __rmul__ = __mul__

    def __pow__(self, n):
        assert isinstance(n, int) and n >= 0
        acc = gf_one(self.qstars)
        base = self
        while n:
            if n & 1:
                acc = acc * base
            base = base * base
            n >>= 1
        return acc

    def inv(self):
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        t = len(self.qstars)
        acc = gf_one(self.qstars)
        for lam in range(1, 1 << t):
            acc = acc * self.tau(lam)
        norm = (self * acc).as_fraction()
        assert norm != 0
        return acc * (Fraction(1) / norm)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        self._check(other)
        return self * other.inv()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = GFElem(self.qstars, {0: other})
        if not isinstance(other, GFElem):
            return NotImplemented
        return self.qstars == other.qstars and self.c == other.c

    def __hash__(self):
        return hash((self.qstars, frozenset(self.c.items())))

    def __repr__(self):
        if not self.c:
            return "GF<0>"
        bits = []
        for m in sorted(self.c):
            co = self.c[m]
            if m == 0:
                bits.append(f"{co}")
            else:
                rad = "*".join(f"sqrt({self.qstars[i]})" for i in _mask_bits(m))
                bits.append(f"{co}*{rad}")
        return "GF<" + " + ".join(bits) + ">"

    # -- automorphisms ------------------------------------------------

    def tau(self, lam):
        """Flip the sign of sqrt(q_i) for every i in lam (mask or bit list)."""
        m = _lam_mask(lam, len(self.qstars))
        out = {}
        for mask, co in self.c.items():
            out[mask] = -co if _popcount(mask & m) % 2 else co
        return GFElem(self.qstars, out)

    def conj(self):
        """Complex conjugation: flips every sqrt of a negative factor."""
        return self.tau(self.neg_mask)

    # -- numerics -----------------------------------------------------

    def numeric(self, prec=96):
        """Evaluate with principal square roots at the given bit precision."""
        with mp.workprec(prec + 8):
            roots = [mp.sqrt(mp.mpc(q)) for q in self.qstars]
            acc = mp.mpc(0)
            for mask in sorted(self.c):
                co = self.c[mask]
                w = mp.mpc(1)
                for i in _mask_bits(mask):
                    w = w * roots[i]
                acc += w * mp.mpf(co.numerator) / co.denominator
            return +acc

    def numeric_real(self, prec=96):
        v = self.numeric(prec)
        assert v.imag == 0, f"not a real element: {self!r}"
        return v.real

    def numeric_imag(self, prec=96):
        v = self.numeric(prec)
        assert v.real == 0, f"not a pure-imaginary element: {self!r}"
        return v.imag


# -- constructors and functional aliases ------------------------------

def gf_rational(qstars, v):
    return GFElem(qstars, {0: Fraction(v)})


def gf_one(qstars):
    return GFElem(qstars, {0: Fraction(1)})


def gf_zero(qstars):
    return GFElem(qstars)


def gf_sqrt_q(qstars, i):
    """The principal sqrt(q_i) as a field element."""
    assert 0 <= i < len(qstars)
    return GFElem(qstars, {1 << i: Fraction(1)})


def gf_sqrt_d(qstars):
    """sqrt of the discriminant: the product of all the sqrt(q_i)."""
    return GFElem(qstars, {(1 << len(qstars)) - 1: Fraction(1)})


def gf_add(a, b):
    return a + b


def gf_mul(a, b):
    return a * b


def gf_conj(x):
    return x.conj()


def gf_tau(lam, x):
    return x.tau(lam)


def gf_to_json(x):
    """Serialize as {mask-as-decimal-string: "num/den"}."""
    return {str(m): f"{co.numerator}/{co.denominator}" for m, co in sorted(x.c.items())}


def gf_from_json(qstars, obj):
    return GFElem(qstars, {int(k): Fraction(v) for k, v in obj.items()})


# -- integral bases ---------------------------------------------------

def _qstars_of(d):
    if hasattr(d, "qstars"):
        return tuple(d.qstars)
    return tuple(d)


def _invert_matrix(rows):
    """Invert a square matrix of Fractions by Gauss-Jordan."""
    n = len(rows)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        assert piv is not None, "singular basis matrix"
        a[col], a[piv] = a[piv], a[col]
        inv = Fraction(1) / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


class GenusBasis:
    """Explicit Z-bases of the real / imaginary halves of the ring of integers.

    beta[mu] spans O_K intersect R, beta_star[mu] spans O_K intersect iR,
    mu running over {0,1}^(t-1) encoded as bitmasks (bit j = s_{j+1}).
    """

    def __init__(self, qstars, u, case, beta, beta_star):
        self.qstars = tuple(qstars)
        self.t = len(self.qstars)
        self.u = u
        self.m = 1 << (self.t - 1)
        self.case = case
        self.beta = tuple(beta)
        self.beta_star = tuple(beta_star)
        self.sqrt_d = gf_sqrt_d(self.qstars)
        self.d = math.prod(self.qstars)
        neg = self.beta[0].neg_mask
        self.real_masks = sorted(m for m in range(1 << self.t) if _popcount(m & neg) % 2 == 0)
        self.imag_masks = sorted(m for m in range(1 << self.t) if _popcount(m & neg) % 2 == 1)
        bmat = [[self.beta[mu].c.get(mask, Fraction(0)) for mu in range(self.m)]
                for mask in self.real_masks]
        smat = [[self.beta_star[mu].c.get(mask, Fraction(0)) for mu in range(self.m)]
                for mask in self.imag_masks]
        self._binv = _invert_matrix(bmat)
        self._sinv = _invert_matrix(smat)

    def expand_beta(self, v):
        """Rational coordinates of a real element over the beta basis."""
        assert v.is_real(), f"expected a real element, got {v!r}"
        col = [v.c.get(mask, Fraction(0)) for mask in self.real_masks]
        return [sum(self._binv[mu][r] * col[r] for r in range(self.m)) for mu in range(self.m)]

    def expand_beta_star(self, v):
        """Rational coordinates of a pure-imaginary element over beta_star."""
        assert v.is_imag(), f"expected a pure-imaginary element, got {v!r}"
        col = [v.c.get(mask, Fraction(0)) for mask in self.imag_masks]
        return [sum(self._sinv[mu][r] * col[r] for r in range(self.m)) for mu in range(self.m)]


def build_basis(d):
    """Build the (beta, beta_star) integral basis pair for a discriminant.

    Accepts a Discriminant (uses .qstars) or a raw tuple of q_i factors
    ordered positives-first with any even factor per the factoring
    convention (+8 leading, -4/-8 trailing).
    """
    qstars = _qstars_of(d)
    t = len(qstars)
    assert t >= 1
    u = sum(1 for q in qstars if q > 0)
    m = 1 << (t - 1)
    assert all(q > 0 for q in qstars[:u]) and all(q < 0 for q in qstars[u:]), qstars
    assert sum(1 for q in qstars if q % 2 == 0) <= 1
    assert (t - u) % 2 == 1  # discriminant is negative

    one = gf_one(qstars)
    alpha, atil = [], []
    for i, q in enumerate(qstars):
        half = Fraction(1, 2)
        if q % 2:
            assert q % 4 == 1
            alpha.append(GFElem(qstars, {0: half, 1 << i: half}))
            atil.append(GFElem(qstars, {0: half, 1 << i: -half}))
        else:
            assert q in (8, -4, -8)
            a = GFElem(qstars, {1 << i: half})  # sqrt(q/4)
            alpha.append(a)
            atil.append(-a)

    if 8 in qstars:
        assert qstars[0] == 8 and 1 <= u <= t - 1
        case = CASE_PLUS8
    elif qstars[-1] in (-4, -8):
        if u == t - 1:
            case = CASE_ALLPOS
        else:
            assert u <= t - 2
            case = CASE_MIXED
    else:
        assert all(q % 2 for q in qstars) and u <= t - 1
        case = CASE_ALL_ODD

    beta, beta_star = [], []
    for smask in range(m):
        s = [(smask >> j) & 1 for j in range(t - 1)]

        if case in (CASE_ALL_ODD, CASE_PLUS8):
            lo = 1 if case == CASE_PLUS8 else 0
            pre, pre_s = one, one
            if case == CASE_PLUS8:
                root2 = GFElem(qstars, {1: Fraction(1, 2)})  # sqrt(8)/2 = sqrt(2)
                pre = root2 if s[0] else one
                pre_s = one if s[0] else root2
            for i in range(lo, u):
                pre = pre * (atil[i] if s[i] else alpha[i])
                pre_s = pre_s * (-atil[i] if s[i] else alpha[i])
            p1 = p2 = q1 = q2 = one
            for i in range(u, t - 1):
                p1 = p1 * (atil[i] if s[i] else alpha[i])
                p2 = p2 * (alpha[i] if s[i] else atil[i])
                q1 = q1 * (-atil[i] if s[i] else alpha[i])
                q2 = q2 * (-alpha[i] if s[i] else atil[i])
            b = pre * (p1 * alpha[t - 1] + p2 * atil[t - 1])
            bs = pre_s * (q1 * alpha[t - 1] - q2 * atil[t - 1])

        elif case == CASE_MIXED:
            pre, pre_s = one, one
            for i in range(u):
                pre = pre * (atil[i] if s[i] else alpha[i])
                pre_s = pre_s * (-atil[i] if s[i] else alpha[i])
            m1 = m2 = mq1 = mq2 = one
            for i in range(u, t - 2):
                m1 = m1 * (atil[i] if s[i] else alpha[i])
                m2 = m2 * (alpha[i] if s[i] else atil[i])
                mq1 = mq1 * (-atil[i] if s[i] else alpha[i])
                mq2 = mq2 * (-alpha[i] if s[i] else atil[i])
            st = s[t - 2]
            at = alpha[t - 1]
            b = pre * (m1 * alpha[t - 2] * (at if st else one)
                       + m2 * atil[t - 2] * ((-at) if st else one))
            bs = pre_s * (mq1 * alpha[t - 2] * (one if st else at)
                          - mq2 * atil[t - 2] * (one if st else (-at)))

        else:  # CASE_ALLPOS
            pre, pre_s = one, one
            for i in range(t - 1):
                pre = pre * (atil[i] if s[i] else alpha[i])
                pre_s = pre_s * (-atil[i] if s[i] else alpha[i])
            b = pre
            bs = pre_s * gf_sqrt_q(qstars, t - 1)

        assert b.is_real(), (qstars, smask)
        assert bs.is_imag(), (qstars, smask)
        beta.append(b)
        beta_star.append(bs)

    basis = GenusBasis(qstars, u, case, beta, beta_star)
    sqrt_d = basis.sqrt_d
    for eta in range(m):
        for nu in range(m):
            want = sqrt_d if eta == nu else gf_zero(qstars)
            if duality_sum(basis, eta, nu) != want:
                raise InternalInvariantError(
                    f"basis duality failed for qstars={qstars} eta={eta} nu={nu}")
    return basis


def duality_sum(basis, eta, nu):
    """Sum over mu of (-1)^|mu| tau_mu(beta_eta * beta_star_nu), exactly.

    Equals sqrt_d when eta == nu and 0 otherwise for a correct basis.
    """
    prod = basis.beta[eta] * basis.beta_star[nu]
    acc = gf_zero(basis.qstars)
    for mu in range(basis.m):
        term = prod.tau(mu)
        acc = acc + (-term if _popcount(mu) % 2 else term)
    return acc


# -- dual systems -----------------------------------------------------

@dataclass(frozen=True)
class MPair:
    """Dual bases (omega, omega_star) of the real subfield plus M-values.

    REAL_PART: omega = beta/beta_0, omega_star = beta_star/beta_star_0.
    IMAG_PART swaps the two.  Either way M(tau_mu) makes the duality sum
    Sum_mu M(tau_mu) tau_mu(omega_lam * omega_star_lam') = [lam == lam']
    hold exactly, which is verified at construction.
    """

    basis: GenusBasis
    variant: str
    omega: tuple
    omega_star: tuple
    mvals: tuple

    @property
    def mid(self):
        return self.mvals[0]


def build_mpair(basis, variant=REAL_PART):
    if variant not in (REAL_PART, IMAG_PART):
        raise InvalidParameters(f"unknown variant {variant!r}")
    qstars = basis.qstars
    m = basis.m
    b0, bs0 = basis.beta[0], basis.beta_star[0]
    b0_inv, bs0_inv = b0.inv(), bs0.inv()
    om = tuple(basis.beta[mu] * b0_inv for mu in range(m))
    oms = tuple(basis.beta_star[mu] * bs0_inv for mu in range(m))
    if variant == IMAG_PART:
        om, oms = oms, om
    prod0 = b0 * bs0
    inv_sqrt_d = basis.sqrt_d * Fraction(1, basis.d)  # 1/sqrt(d)
    mvals = []
    for mu in range(m):
        v = prod0.tau(mu) * inv_sqrt_d
        mvals.append(-v if _popcount(mu) % 2 else v)
    mvals = tuple(mvals)

    if oms[0] != 1:
        raise InternalInvariantError("omega_star_0 is not 1")
    one = gf_one(qstars)
    zero = gf_zero(qstars)
    for lam in range(m):
        for lamp in range(m):
            acc = zero
            prod = om[lam] * oms[lamp]
            for mu in range(m):
                acc = acc + mvals[mu] * prod.tau(mu)
            want = one if lam == lamp else zero
            if acc != want:
                raise InternalInvariantError(
                    f"dual-system identity failed for qstars={qstars} "
                    f"variant={variant} lam={lam} lam'={lamp}")
    for v in mvals:
        assert v.is_real()
    return MPair(basis, variant, om, oms, mvals)


# -- quadratic generators and structure constants ---------------------

def delta_g(d, lam):
    """The positive integer delta_lam and generator g_lam of one real
    quadratic subfield; g = sqrt(delta)/2 for even delta, (1+sqrt(delta))/2
    for odd.  Accepts a Discriminant or GenusBasis (anything with .qstars
    and .u)."""
    if hasattr(d, "qstars") and hasattr(d, "u"):
        qstars, u = tuple(d.qstars), d.u
    else:
        qstars = _qstars_of(d)
        u = sum(1 for q in qstars if q > 0)
    t = len(qstars)
    mlam = _lam_mask(lam, t - 1)
    if mlam == 0:
        raise InvalidParameters("lam must be nonzero")
    delta = 1
    mask = 0
    for j in range(t - 1):
        if (mlam >> j) & 1:
            delta *= qstars[j]
            mask |= 1 << j
    xor = _popcount(mlam >> u) % 2  # bits u..t-2 of lam
    if xor:
        delta *= qstars[t - 1]
        mask |= 1 << (t - 1)
    assert delta > 0
    assert math.isqrt(delta) ** 2 != delta
    negs = sum(1 for i in _mask_bits(mask) if qstars[i] < 0)
    assert negs % 2 == 0
    sign = 1 if negs % 4 == 0 else -1
    root = GFElem(qstars, {mask: sign})  # equals the positive sqrt(delta)
    if delta % 2:
        assert delta % 4 == 1
        g = (gf_one(qstars) + root) * Fraction(1, 2)
    else:
        assert delta % 4 == 0
        g = root * Fraction(1, 2)
    return delta, g


def default_x_set(basis):
    """X_0 = 1 and X_eta = g_eta for eta != 0."""
    xs = [gf_one(basis.qstars)]
    for lam in range(1, basis.m):
        xs.append(delta_g(basis, lam)[1])
    return tuple(xs)


@dataclass(frozen=True)
class StructureConstants:
    """Integer tensor expanding omega_xi * X_eta (or omega_star_xi * X_eta
    when dual=True) over the same basis: tensor[eta][xi][mu]."""

    X_set: tuple
    tensor: tuple
    dual: bool


def structure_constants(mpair, X_set=None, dual=False):
    basis = mpair.basis
    if X_set is None:
        X_set = default_x_set(basis)
    m = basis.m
    assert len(X_set) == m
    # omega-expansions reduce to beta-expansions: v = sum x_mu omega_mu
    # iff v*norm = sum x_mu beta_mu where norm is the omega denominator.
    use_star = (mpair.variant == REAL_PART) == dual
    fam = basis.beta_star if use_star else basis.beta
    expand = basis.expand_beta_star if use_star else basis.expand_beta
    tensor = []
    for eta in range(m):
        rows = []
        for xi in range(m):
            coords = expand(fam[xi] * X_set[eta])
            for co in coords:
                if co.denominator != 1:
                    raise InvalidParameters(
                        f"X_set element {eta} gives non-integer structure constants")
            rows.append(tuple(int(co) for co in coords))
        tensor.append(tuple(rows))
    return StructureConstants(tuple(X_set), tuple(tensor), dual)
