"""Class polynomials: the full integer H_D[theta] and its genus divisor.

The full path multiplies (x - theta(alpha_i)) over a whole N-system and
rounds to integers -- the classical construction, kept as the oracle.
The divisor path multiplies only over forms whose genus character equals
phi0 (h / 2^(t-1) of them) and recovers each coefficient as an exact
element of the genus field from its float approximation.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

from mpmath import mp

from .arith import Discriminant
from .errors import InternalInvariantError, InvalidParameters, \
    PrecisionEscalation, PrecisionExhausted
from .forms import enumerate_reduced, n_system, phi_class
from .genusfield import GFElem, IMAG_PART, REAL_PART, build_basis, \
    gf_from_json, gf_rational, gf_to_json
from .modfns import InvariantKind, theta_value
from .recover import make_plan, recover_coords

DEFAULT_MAX_BITS = 1 << 20


def max_bits_limit():
    v = os.environ.get("CMFORGE_MAX_BITS")
    return int(v) if v else DEFAULT_MAX_BITS


@dataclass(frozen=True)
class ClassPolynomial:
    D: int
    kind: InvariantKind
    phi0: object          # None for the full polynomial, else the +-1 tuple
    coeffs: tuple         # ascending, leading coefficient included (monic)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def is_divisor(self):
        return self.phi0 is not None

    def to_json(self):
        out = {"D": self.D, "invariant": str(self.kind), "degree": self.degree}
        if self.is_divisor:
            qs = next(iter(self.coeffs)).qstars
            out["phi0"] = list(self.phi0)
            out["field"] = list(qs)
            out["coeffs"] = [gf_to_json(c) for c in self.coeffs]
        else:
            out["phi0"] = None
            out["coeffs"] = [str(c) for c in self.coeffs]
        return out

    @classmethod
    def from_json(cls, obj):
        kind = InvariantKind.parse(obj["invariant"])
        if obj.get("phi0") is None:
            coeffs = tuple(int(c) for c in obj["coeffs"])
            return cls(obj["D"], kind, None, coeffs)
        qs = tuple(obj["field"])
        coeffs = tuple(gf_from_json(qs, c) for c in obj["coeffs"])
        return cls(obj["D"], kind, tuple(obj["phi0"]), coeffs)


def _mul_linear(poly, theta):
    """poly(x) * (x - theta) on ascending coefficient lists."""
    out = [-theta * poly[0]]
    for k in range(1, len(poly)):
        out.append(poly[k - 1] - theta * poly[k])
    out.append(poly[-1])
    return out


def _expand(thetas):
    """Product of (x - theta) in ascending |theta| to limit growth."""
    poly = [mp.mpf(1)]
    for th in sorted(thetas, key=abs):
        poly = _mul_linear(poly, th)
    return poly


def _full_bits_estimate(d, kind):
    ratio = kind.height_ratio(d)
    with mp.workprec(64):
        s = sum(mp.mpf(1) / f.A for f in enumerate_reduced(d.D))
        ln_coeff = float(ratio) * mp.pi * mp.sqrt(abs(d.D)) * s
        return int(1.05 * ln_coeff / mp.log(2)) + 16 * int(s + 1) + 96


def class_poly_full(D, kind=None, start_bits=None, max_bits=None):
    """H_D[theta] with integer coefficients, by rounding the expanded product."""
    kind = kind or InvariantKind.j()
    d = Discriminant.from_D(D)
    kind.validate_for(d)
    sysN = n_system(D, kind.modulus(d), kind.b_target(d))
    bits = start_bits or _full_bits_estimate(d, kind)
    cap = max_bits or max_bits_limit()
    while True:
        try:
            return ClassPolynomial(D, kind, None, _full_attempt(sysN, kind, bits))
        except PrecisionEscalation:
            bits *= 2
            if bits > cap:
                raise PrecisionExhausted(
                    f"class polynomial for D={D} needs more than {cap} bits")


def _full_attempt(sysN, kind, bits):
    n = len(sysN.forms)
    work = bits + 8 * n + 32
    thetas = [theta_value(kind, f, work) for f in sysN.forms]
    with mp.workprec(work + 64):
        poly = _expand(thetas)
        coeffs = []
        top = 0
        for c in poly[:-1]:
            r = int(mp.nint(mp.re(c)))
            if abs(c - r) >= 0.25:
                raise PrecisionEscalation(
                    f"coefficient residual {mp.nstr(abs(c - r), 5)} at {bits} bits")
            coeffs.append(r)
            top = max(top, abs(r).bit_length())
        # a small residual alone proves nothing once the accumulated product
        # error exceeds 1/4; only trust the rounding when the working
        # precision clears the coefficient size with room to spare
        if top + 4 * n + 16 > work:
            raise PrecisionEscalation(
                f"{top}-bit coefficients at {bits} working bits")
    return tuple(coeffs) + (1,)


def divisor_forms(D, kind, phi0=None):
    """The N-system members whose genus character equals phi0."""
    d = Discriminant.from_D(D)
    phi0 = tuple(phi0) if phi0 is not None else (1,) * d.t
    if len(phi0) != d.t or any(e not in (-1, 1) for e in phi0):
        raise InvalidParameters(f"bad coset label {phi0} for t={d.t}")
    sysN = n_system(D, kind.modulus(d), kind.b_target(d))
    sel = [f for f in sysN.forms if phi_class(f, d) == phi0]
    if not sel:
        raise InvalidParameters(
            f"coset label {phi0} is not in the image of the genus map for D={D}")
    return phi0, sel


def class_poly_divisor(D, kind=None, phi0=None, plan=None, max_bits=None):
    """The genus divisor of H_D[theta] with exact genus-field coefficients."""
    kind = kind or InvariantKind.j()
    d = Discriminant.from_D(D)
    kind.validate_for(d)
    basis = build_basis(d)
    phi0, sel = divisor_forms(D, kind, phi0)
    h = len(enumerate_reduced(D))
    assert len(sel) == h // d.m, (len(sel), h, d.m)
    cap = max_bits or max_bits_limit()
    if plan is None:
        plan = make_plan(D, kind)
    while True:
        if plan.float_bits > cap:
            raise PrecisionExhausted(
                f"divisor recovery for D={D} would need {plan.float_bits} bits "
                f"(cap {cap}); T0 estimate too small or parameters inconsistent")
        try:
            coeffs = _divisor_attempt(kind, basis, sel, plan)
            return ClassPolynomial(D, kind, phi0, coeffs)
        except PrecisionEscalation:
            # square T0: roughly doubles the working precision
            plan = make_plan(D, kind, T0=mp.mpf(plan.T0) ** 2)


def _divisor_attempt(kind, basis, sel, plan):
    n = len(sel)
    bits = plan.float_bits + 8 * n + 32
    thetas = [theta_value(kind, f, bits) for f in sel]
    half = Fraction(1, 2)
    coeffs = []
    with mp.workprec(bits + 64):
        poly = _expand(thetas)
        approx = [(c + mp.conj(c), c - mp.conj(c)) for c in poly[:-1]]
    for g_re, g_im in approx:
        b = recover_coords(g_re, plan, REAL_PART)
        bp = recover_coords(g_im, plan, IMAG_PART)
        z = gf_rational(basis.qstars, 0)
        for coef, elem in zip(b, basis.beta):
            z = z + coef * elem
        for coef, elem in zip(bp, basis.beta_star):
            z = z + coef * elem
        coeffs.append(half * z)
    return tuple(coeffs) + (gf_rational(basis.qstars, 1),)


def coset_labels(D):
    """The image of the genus character map: 2^(t-1) labels."""
    d = Discriminant.from_D(D)
    seen = []
    for f in enumerate_reduced(D):
        lab = phi_class(f, d)
        if lab not in seen:
            seen.append(lab)
    assert len(seen) == d.m
    return seen


def coset_product_check(D, kind=None):
    """Exact product of all coset divisors equals the full polynomial."""
    kind = kind or InvariantKind.j()
    d = Discriminant.from_D(D)
    basis = build_basis(d)
    full = class_poly_full(D, kind)
    plan = make_plan(D, kind)
    prod = [gf_rational(basis.qstars, 1)]
    for phi0 in coset_labels(D):
        div = class_poly_divisor(D, kind, phi0, plan=plan)
        new = [gf_rational(basis.qstars, 0)
               for _ in range(len(prod) + len(div.coeffs) - 1)]
        for i, a in enumerate(prod):
            for j, b in enumerate(div.coeffs):
                new[i + j] = new[i + j] + a * b
        prod = new
    if len(prod) != len(full.coeffs):
        return False
    for got, want in zip(prod, full.coeffs):
        if not got.is_rational() or got.as_fraction() != want:
            return False
    return True
