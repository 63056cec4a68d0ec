"""Modular functions evaluated at form roots: eta, Weber f/f1/f2, gamma2, j,
the Weber class invariant g, and the double eta quotient m_{p1,p2}^s.

All evaluations take a precision (bits or a PrecisionBudget) and work at
bits + guard internally; values are principal-branch throughout, with
q^(1/24) = exp(pi i z / 12).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from mpmath import mp

from .arith import Discriminant, is_probable_prime, kronecker
from .errors import InvalidParameters, UnsupportedInvariant
from .forms import QuadForm, root_of_form

__all__ = [
    "PrecisionBudget",
    "eta",
    "weber_f",
    "weber_f1",
    "weber_f2",
    "gamma2",
    "jfun",
    "weber_g",
    "double_eta_m",
    "InvariantKind",
    "theta_value",
]


@dataclass(frozen=True)
class PrecisionBudget:
    bits: int
    guard: int = 64

    @property
    def total(self) -> int:
        return self.bits + self.guard


def _total_bits(prec) -> int:
    if isinstance(prec, PrecisionBudget):
        return prec.total
    return int(prec) + 64


def eta(z, prec=96):
    """Dedekind eta via the pentagonal number series.

    eta(z) = q^(1/24) * sum_n (-1)^n q^(n(3n+1)/2), summing until three
    consecutive terms drop below the working threshold.
    """
    bits = _total_bits(prec)
    with mp.workprec(bits):
        z = mp.mpc(z)
        if z.imag <= 0:
            raise InvalidParameters(f"eta needs Im z > 0, got {z}")
        q24 = mp.exp(mp.pi * mp.mpc(0, 1) * z / 12)
        q = q24 ** 24
        thresh = mp.mpf(2) ** (-bits - 16)
        s = mp.one
        qe = mp.one       # q^(n(3n-1)/2), the smaller pentagonal exponent
        qn = mp.one       # q^n
        q3 = q * q * q
        qstep = q ** -2   # q^(3n-2) one step back; first loop multiply gives q^1
        below = 0
        n = 0
        while below < 3:
            n += 1
            qstep *= q3
            qe *= qstep
            qn *= q
            term = qe * (1 + qn)
            s += -term if n % 2 else term
            if abs(term) < thresh:
                below += 1
            else:
                below = 0
        return q24 * s


def weber_f(z, prec=96):
    return mp.exp(mp.mpc(0, -1) * mp.pi / 24) * eta((z + 1) / 2, prec) / eta(z, prec)


def weber_f1(z, prec=96):
    return eta(z / 2, prec) / eta(z, prec)


def weber_f2(z, prec=96):
    return mp.sqrt(2) * eta(2 * z, prec) / eta(z, prec)


def gamma2(z, prec=96):
    """Cube root of j; computed from f2, whose eta arguments stay high in H."""
    f2 = weber_f2(z, prec)
    e8 = f2 ** 8
    return (e8 * e8 * e8 + 16) / e8


def jfun(z, prec=96):
    return gamma2(z, prec) ** 3


_WEBER_CASES = {
    # key -> (which weber function, inner power, scale exponent of sqrt2, sign from (2/A)?)
    # value g = (sign * f^b / 2^(k/2)) and the class invariant is g^3 (or g when
    # the 3 | B refinement applies).
    1: ("f", 2, 1, True),
    3: ("f", 1, 0, False),
    5: ("f", 4, 2, False),
    7: ("f", 1, 1, True),
    2: ("f1", 2, 1, True),   # m = 2 (mod 4)
    4: ("f1", 4, 3, True),   # m = 4 (mod 8)
}


def _weber_case(D: int) -> int:
    if D % 4 != 0:
        raise UnsupportedInvariant(f"Weber g needs D = -4m, got {D}")
    m = -D // 4
    if m % 2 == 1:
        return m % 8
    if m % 4 == 2:
        return 2
    if m % 8 == 4:
        return 4
    raise UnsupportedInvariant(f"Weber g undefined for m = 0 (mod 8), D = {D}")


def weber_g(form: QuadForm, prec=96, cubed: bool = True):
    """Weber's class invariant at the root of a 16- or 48-system form.

    The form must have A odd and 32 | B; when cubed=False (allowed iff 3 does
    not divide D) also 3 | B and 3 does not divide A, and the plain g value is
    already an algebraic integer generating the ring class field.
    """
    D = form.disc
    case = _weber_case(D)
    if form.A % 2 == 0 or form.B % 32 != 0:
        raise InvalidParameters(f"Weber g needs 2 coprime to A and 32 | B: {form}")
    if not cubed:
        if D % 3 == 0:
            raise InvalidParameters(f"uncubed Weber g needs 3 coprime to D, D={D}")
        if form.A % 3 == 0 or form.B % 3 != 0:
            raise InvalidParameters(f"uncubed Weber g needs 3 coprime to A, 3 | B: {form}")
    fname, b, k, use_sign = _WEBER_CASES[case]
    bits = _total_bits(prec)
    with mp.workprec(bits):
        alpha = root_of_form(form)
        f = weber_f(alpha, prec) if fname == "f" else weber_f1(alpha, prec)
        g = f ** b / mp.sqrt(2) ** k
        if use_sign:
            g *= kronecker(2, form.A)
        return g ** 3 if cubed else g


def double_eta_s(p1: int, p2: int) -> int:
    return 24 // math.gcd(24, (p1 - 1) * (p2 - 1))


def double_eta_m(z, p1: int, p2: int, prec=96):
    """The double eta quotient m_{p1,p2}(z)^s, s = 24/gcd(24,(p1-1)(p2-1))."""
    bits = _total_bits(prec)
    with mp.workprec(bits):
        z = mp.mpc(z)
        quot = (eta(z / p1, prec) * eta(z / p2, prec)) / (eta(z, prec) * eta(z / (p1 * p2), prec))
        return quot ** double_eta_s(p1, p2)


@dataclass(frozen=True)
class InvariantKind:
    """Which class invariant to use: j, gamma2, Weber g, or a double eta quotient."""

    name: str
    p1: Optional[int] = None
    p2: Optional[int] = None

    _NAMES = ("j", "gamma2", "weber", "doubleeta")

    def __post_init__(self):
        if self.name not in self._NAMES:
            raise InvalidParameters(f"unknown invariant {self.name!r}")
        if self.name == "doubleeta":
            if not (self.p1 and self.p2 and is_probable_prime(self.p1)
                    and is_probable_prime(self.p2)):
                raise InvalidParameters(f"doubleeta needs two primes, got {self.p1},{self.p2}")
        elif self.p1 is not None or self.p2 is not None:
            raise InvalidParameters(f"{self.name} takes no prime parameters")

    # constructors
    @classmethod
    def j(cls):
        return cls("j")

    @classmethod
    def gamma2(cls):
        return cls("gamma2")

    @classmethod
    def weber(cls):
        return cls("weber")

    @classmethod
    def double_eta(cls, p1, p2):
        return cls("doubleeta", min(p1, p2), max(p1, p2))

    def __str__(self):
        if self.name == "doubleeta":
            return f"doubleeta:{self.p1},{self.p2}"
        return self.name

    @classmethod
    def parse(cls, text: str) -> "InvariantKind":
        if text.startswith("doubleeta:"):
            try:
                p1, p2 = (int(x) for x in text.split(":", 1)[1].split(","))
            except ValueError:
                raise InvalidParameters(f"cannot parse invariant {text!r}")
            return cls.double_eta(p1, p2)
        return cls(text)

    # --- discriminant-dependent behaviour ----------------------------------

    def validate_for(self, disc: Discriminant) -> None:
        D = disc.D
        if self.name == "gamma2":
            if D % 3 == 0:
                raise UnsupportedInvariant(f"gamma2 needs 3 coprime to D, D={D}")
        elif self.name == "weber":
            _weber_case(D)  # raises when unsupported
        elif self.name == "doubleeta":
            p1, p2 = self.p1, self.p2
            if p1 != p2:
                if kronecker(D, p1) == -1 or kronecker(D, p2) == -1:
                    raise UnsupportedInvariant(
                        f"doubleeta {p1},{p2}: D={D} must not be inert at either prime")
                if disc.f % p1 == 0 or disc.f % p2 == 0:
                    raise UnsupportedInvariant(
                        f"doubleeta {p1},{p2}: primes must not divide the conductor")
            else:
                if not (kronecker(D, p1) == 1 or disc.f % p1 == 0):
                    raise UnsupportedInvariant(
                        f"doubleeta {p1},{p1}: need (D/p) = 1 or p | f")
                if p1 == 2 and kronecker(D, 2) != 1 and D % 32 == 4:
                    raise UnsupportedInvariant("doubleeta 2,2 undefined for D = 4 (mod 32)")

    def weber_cubed(self, disc: Discriminant) -> bool:
        # drop the cube whenever 3 does not divide D: smaller values and a
        # 48-system make the refined invariant available
        return disc.D % 3 == 0

    def modulus(self, disc: Discriminant) -> int:
        if self.name == "j":
            return 1
        if self.name == "gamma2":
            return 3
        if self.name == "weber":
            return 16 if self.weber_cubed(disc) else 48
        return self.p1 * self.p2

    def b_target(self, disc: Discriminant) -> Optional[int]:
        D = disc.D
        if self.name == "j":
            return None
        if self.name == "gamma2":
            return 0 if D % 2 == 0 else 3
        if self.name == "weber":
            return 0
        N = self.p1 * self.p2
        for b in range(D % 2, 2 * N, 2):
            if (b * b - D) % (4 * N) == 0:
                return b
        raise UnsupportedInvariant(
            f"no residue b with b^2 = D (mod 4*{N}); doubleeta {self.p1},{self.p2} "
            f"unavailable for D={D}")

    def height_ratio(self, disc: Discriminant) -> Fraction:
        """deg_j(Phi) / deg_theta(Phi) for the modular relation tying theta to j."""
        if self.name == "j":
            return Fraction(1)
        if self.name == "gamma2":
            return Fraction(1, 3)
        if self.name == "weber":
            _, b, _, _ = _WEBER_CASES[_weber_case(disc.D)]
            e = 3 * b if self.weber_cubed(disc) else b
            return Fraction(e, 72)
        p1, p2 = self.p1, self.p2
        psi = (p1 + 1) * (p2 + 1) if p1 != p2 else p1 * (p1 + 1)
        return Fraction(double_eta_s(p1, p2) * (p1 - 1) * (p2 - 1), 12 * psi)


def theta_value(kind: InvariantKind, form: QuadForm, prec=96):
    """Evaluate the invariant at the root of an N-system form."""
    if kind.name == "j":
        bits = _total_bits(prec)
        with mp.workprec(bits):
            return jfun(root_of_form(form), prec)
    if kind.name == "gamma2":
        if form.A % 3 == 0 or form.B % 3 != 0:
            raise InvalidParameters(f"gamma2 needs 3 coprime to A and 3 | B: {form}")
        bits = _total_bits(prec)
        with mp.workprec(bits):
            return gamma2(root_of_form(form), prec)
    if kind.name == "weber":
        cubed = form.disc % 3 == 0
        return weber_g(form, prec, cubed=cubed)
    N = kind.p1 * kind.p2
    if math.gcd(form.A, N) != 1 or form.C % N != 0:
        raise InvalidParameters(f"doubleeta needs gcd(A,N)=1 and N | C: {form}")
    bits = _total_bits(prec)
    with mp.workprec(bits):
        return double_eta_m(root_of_form(form), kind.p1, kind.p2, prec)
