"""Prime-field tail: reduce the class polynomial mod p, pick a root, build
the curve, and choose the twist with the prescribed order.

Polynomials over F_p are dense coefficient lists, ascending, ints in [0, p).
Points are (x, y) tuples or None for infinity.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .arith import Discriminant, kronecker, sqrt_mod_p, validate_params
from .classpoly import ClassPolynomial, class_poly_divisor, class_poly_full
from .errors import (InternalInvariantError, InvalidParameters,
                     PrecisionExhausted, UnsupportedInvariant)
from .modfns import InvariantKind, _weber_case
from .recover import make_plan

__all__ = [
    "sqrt_mod_p",
    "WeierstrassCurve",
    "make_curve",
    "reduce_divisor_mod_p",
    "roots_in_fp",
    "curve_from_j",
    "j_from_theta",
    "point_add",
    "point_neg",
    "scalar_mul",
    "is_on_curve",
    "random_point",
    "naive_count",
    "select_twist",
    "gen_curve",
]


@dataclass(frozen=True)
class WeierstrassCurve:
    """y^2 = x^3 + ax + b over F_p, nonsingular."""

    p: int
    a: int
    b: int

    def j_invariant(self):
        p, a, b = self.p, self.a, self.b
        num = 1728 * 4 * pow(a, 3, p)
        den = (4 * pow(a, 3, p) + 27 * pow(b, 2, p)) % p
        return num * pow(den, -1, p) % p


def make_curve(p, a, b):
    a, b = a % p, b % p
    if (4 * a * a * a + 27 * b * b) % p == 0:
        raise InvalidParameters(f"singular curve a={a}, b={b} mod {p}")
    return WeierstrassCurve(p, a, b)


# ---------------------------------------------------------------------------
# reduction of the genus divisor

def reduce_divisor_mod_p(poly: ClassPolynomial, p, signs=None):
    """Coefficients of poly mod a prime of the genus field above p.

    Each sqrt(q_i*) is sent to s_i = sqrt_mod_p(q_i*), the smaller root by
    default; signs (a +-1 tuple) flips individual choices, which picks a
    different (conjugate) prime above p.  Full polynomials reduce verbatim.
    """
    if not poly.is_divisor:
        return [c % p for c in poly.coeffs]
    disc = Discriminant.from_D(poly.D)
    if signs is None:
        signs = (1,) * disc.t
    assert len(signs) == disc.t and all(e in (1, -1) for e in signs)
    s = []
    for q, e in zip(disc.qstars, signs):
        r = sqrt_mod_p(q % p, p)
        if r is None:
            raise InvalidParameters(
                f"{q} is a non-residue mod {p}; p does not split in the genus field")
        s.append(r if e == 1 else p - r)
    out = []
    for c in poly.coeffs:
        acc = 0
        for mask, frac in c.c.items():
            term = frac.numerator * pow(frac.denominator, -1, p)
            for i in range(disc.t):
                if mask >> i & 1:
                    term *= s[i]
            acc += term
        out.append(acc % p)
    assert out[-1] == 1
    return out


# ---------------------------------------------------------------------------
# dense polynomial helpers over F_p

def _ptrim(f):
    while f and f[-1] == 0:
        f.pop()
    return f


def _pmod(f, g, p):
    f = list(f)
    dg = len(g) - 1
    inv = pow(g[-1], -1, p)
    while len(f) - 1 >= dg and f:
        c = f[-1] * inv % p
        shift = len(f) - 1 - dg
        for i, gc in enumerate(g):
            f[shift + i] = (f[shift + i] - c * gc) % p
        _ptrim(f)
    return f


def _pquo(f, g, p):
    f = list(f)
    dg = len(g) - 1
    inv = pow(g[-1], -1, p)
    out = [0] * (len(f) - dg)
    while len(f) - 1 >= dg and f:
        c = f[-1] * inv % p
        shift = len(f) - 1 - dg
        out[shift] = c
        for i, gc in enumerate(g):
            f[shift + i] = (f[shift + i] - c * gc) % p
        _ptrim(f)
    return out


def _pgcd(f, g, p):
    f, g = list(f), list(g)
    while g:
        f, g = g, _pmod(f, g, p)
    if f:
        inv = pow(f[-1], -1, p)
        f = [c * inv % p for c in f]
    return f


def _pmulmod(f, g, h, p):
    out = [0] * (len(f) + len(g) - 1)
    for i, fc in enumerate(f):
        if fc:
            for j, gc in enumerate(g):
                out[i + j] = (out[i + j] + fc * gc) % p
    return _pmod(out, h, p)


def _ppowmod(f, e, h, p):
    out = [1]
    f = _pmod(f, h, p)
    while e:
        if e & 1:
            out = _pmulmod(out, f, h, p)
        f = _pmulmod(f, f, h, p)
        e >>= 1
    return out


def _psub(f, g, p):
    out = [0] * max(len(f), len(g))
    for i, c in enumerate(f):
        out[i] = c
    for i, c in enumerate(g):
        out[i] = (out[i] - c) % p
    return _ptrim(out)


def roots_in_fp(f, p, seed=0):
    """All roots of f in F_p with multiplicity, sorted.

    gcd with x^p - x isolates the distinct roots, randomized equal-degree
    splitting with (x+a)^((p-1)/2) - 1 separates them; multiplicities by
    repeated division of the input.  Deterministic for a fixed seed.
    """
    f = _ptrim([c % p for c in f])
    assert f and f[-1] == 1, "need a monic nonzero polynomial"
    if len(f) == 1:
        return []
    rng = random.Random(seed)
    xp = _ppowmod([0, 1], p, f, p)
    lin = _pgcd(_psub(xp, [0, 1], p), f, p)

    def split(g):
        if len(g) <= 1:
            return []
        if len(g) == 2:
            return [(-g[0]) % p]
        while True:
            a = rng.randrange(p)
            h = _ppowmod([a, 1], (p - 1) // 2, g, p)
            h = _psub(h, [1], p)
            d = _pgcd(h, g, p)
            if 0 < len(d) - 1 < len(g) - 1:
                return split(d) + split(_pquo(g, d, p))

    roots = []
    for r in sorted(split(lin)):
        g = f
        while True:
            rem = 0
            for c in reversed(g):
                rem = (rem * r + c) % p
            if rem != 0:
                break
            roots.append(r)
            g = _pquo(g, [(-r) % p, 1], p)
    return roots


# ---------------------------------------------------------------------------
# from invariant root to a curve

def curve_from_j(j, p):
    j %= p
    if j == 0:
        return make_curve(p, 0, 1)
    if j == 1728 % p:
        return make_curve(p, 1, 0)
    c = j * pow((1728 - j) % p, -1, p) % p
    return make_curve(p, 3 * c, 2 * c)


# m (mod 8) case -> (scale, power, use f1?) rebuilding x = f^24 (or f1^24)
# from s = g^3; j = (x-16)^3/x for f, (x+16)^3/x for f1
_WEBER_REBUILD = {
    1: (64, 4, False),
    3: (1, 8, False),
    5: (64, 2, False),
    7: (4096, 8, False),
    2: (64, 4, True),
    4: (512, 2, True),
}


def j_from_theta(r, kind: InvariantKind, p, D=None):
    """Candidate j-invariants mod p from a root r of the class polynomial."""
    r %= p
    if kind.name == "j":
        return [r]
    if kind.name == "gamma2":
        return [pow(r, 3, p)]
    if kind.name == "weber":
        if D is None:
            raise InvalidParameters("Weber j reconstruction needs D")
        if r == 0:
            raise InvalidParameters("zero Weber value cannot occur for valid (D,p)")
        # the polynomial root is g itself when 3 does not divide D; the
        # rebuild table is stated for s = g^3
        s = r if D % 3 == 0 else pow(r, 3, p)
        scale, power, f1 = _WEBER_REBUILD[_weber_case(D)]
        x = scale * pow(s, power, p) % p
        if x == 0:
            raise InvalidParameters("degenerate Weber rebuild x = 0")
        shift = 16 if f1 else -16
        j = pow(x + shift, 3, p) * pow(x, -1, p) % p
        return [j]
    raise UnsupportedInvariant(f"cannot rebuild j from {kind} values")


# ---------------------------------------------------------------------------
# point arithmetic

def is_on_curve(P, curve):
    if P is None:
        return True
    x, y = P
    return (y * y - x * x * x - curve.a * x - curve.b) % curve.p == 0


def point_neg(P, curve):
    if P is None:
        return None
    x, y = P
    return (x, (-y) % curve.p)


def point_add(P, Q, curve):
    if P is None:
        return Q
    if Q is None:
        return P
    p = curve.p
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2 and (y1 + y2) % p == 0:
        return None
    if P == Q:
        lam = (3 * x1 * x1 + curve.a) * pow(2 * y1, -1, p) % p
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, p) % p
    x3 = (lam * lam - x1 - x2) % p
    return (x3, (lam * (x1 - x3) - y1) % p)


def scalar_mul(k, P, curve):
    if k < 0:
        return scalar_mul(-k, point_neg(P, curve), curve)
    acc = None
    while k:
        if k & 1:
            acc = point_add(acc, P, curve)
        P = point_add(P, P, curve)
        k >>= 1
    return acc


def random_point(curve, rng):
    p = curve.p
    while True:
        x = rng.randrange(p)
        rhs = (x * x * x + curve.a * x + curve.b) % p
        y = sqrt_mod_p(rhs, p)
        if y is not None:
            return (x, y)


def naive_count(curve):
    """Exact group order by character sum; only for small p."""
    p = curve.p
    assert p <= 10 ** 4, "naive count is quadratic, use it only for small p"
    total = p + 1
    for x in range(p):
        total += kronecker(x * x * x + curve.a * x + curve.b, p)
    return total


# ---------------------------------------------------------------------------
# twist selection

def _nonresidue(p):
    c = 2
    while kronecker(c, p) != -1:
        c += 1
    return c


def _sextic_generator(p):
    # order-6 image in F_p* / (F_p*)^6: a non-square non-cube
    assert p % 3 == 1
    g = 2
    while pow(g, (p - 1) // 2, p) == 1 or pow(g, (p - 1) // 3, p) == 1:
        g += 1
    return g


def _twist_family(curve):
    """All twists sharing curve's j-invariant, dispatched on its shape."""
    p = curve.p
    if curve.a == 0:       # j = 0: sextic family
        g = _sextic_generator(p)
        return [make_curve(p, 0, curve.b * pow(g, i, p)) for i in range(6)]
    if curve.b == 0:       # j = 1728: quartic family
        g = _nonresidue(p)
        return [make_curve(p, curve.a * pow(g, i, p), 0) for i in range(4)]
    c = _nonresidue(p)
    return [curve, make_curve(p, curve.a * c * c, curve.b * pow(c, 3, p))]


def select_twist(curve, D, target_order, rng=None):
    """The member of curve's twist family with the prescribed order.

    Small p: exact naive count.  Large p: target*P = infinity on 10 random
    points per candidate, requiring a unique survivor (candidate orders are
    pairwise distinct for valid CM parameters, so ties mean the point test
    failed to separate and we refuse to guess).
    """
    if isinstance(rng, int) or rng is None:
        rng = random.Random(rng or 0)
    family = _twist_family(curve)
    if curve.p <= 10 ** 4:
        for cand in family:
            if naive_count(cand) == target_order:
                return cand
        raise InvalidParameters(
            f"no twist over F_{curve.p} has order {target_order}")
    passing = []
    for cand in family:
        pts = [random_point(cand, rng) for _ in range(10)]
        if all(scalar_mul(target_order, P, cand) is None for P in pts):
            passing.append(cand)
    if len(passing) == 1:
        return passing[0]
    if not passing:
        raise InvalidParameters(
            f"no twist over F_{curve.p} has order {target_order}")
    raise InternalInvariantError(
        f"twist selection ambiguous: {len(passing)} candidates pass")


# ---------------------------------------------------------------------------
# end-to-end

def gen_curve(D, p, u, v, kind=None, path="auto", seed=0, plan=None, max_bits=None):
    """Curve over F_p with exactly p + 1 - u points, via the CM class polynomial.

    path: "divisor" (genus divisor, the point of the whole pipeline), "full"
    (classic H_D), or "auto" = divisor with full fallback on precision
    exhaustion.  Returns {curve, j, order, transcript}.
    """
    kind = kind or InvariantKind.j()
    disc = validate_params(D, p, u, v)
    if kind.name not in ("j", "gamma2", "weber"):
        raise UnsupportedInvariant(f"no j reconstruction for {kind}")
    kind.validate_for(disc)
    if path not in ("auto", "divisor", "full"):
        raise InvalidParameters(f"unknown path {path!r}")
    target = p + 1 - u

    transcript = {"D": D, "p": p, "u": u, "v": v, "invariant": str(kind),
                  "target": target}
    used = path
    fp = None
    if path in ("auto", "divisor"):
        try:
            if plan is None:
                plan = make_plan(D, kind)
            poly = class_poly_divisor(D, kind, plan=plan, max_bits=max_bits)
            fp = reduce_divisor_mod_p(poly, p)
            used = "divisor"
            transcript.update(T0=plan.T0, N0=plan.N0, float_bits=plan.float_bits,
                              degree=poly.degree)
        except PrecisionExhausted:
            if path == "divisor":
                raise
            fp = None
    if fp is None:
        poly = class_poly_full(D, kind, max_bits=max_bits)
        fp = [c % p for c in poly.coeffs]
        used = "full"
        transcript.update(degree=poly.degree)
    transcript["path"] = used

    roots = roots_in_fp(fp, p, seed=seed)
    if not roots:
        raise InternalInvariantError(
            f"class polynomial for D={D} has no root mod {p} despite valid parameters")
    r = roots[0]
    j = j_from_theta(r, kind, p, D=D)[0]
    base = curve_from_j(j, p)
    rng = random.Random(seed)
    curve = select_twist(base, D, target, rng)
    transcript.update(root=r, j=j, twist=_twist_family(base).index(curve))
    return {"curve": curve, "j": j, "order": target, "transcript": transcript}
