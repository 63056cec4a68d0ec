"""Integer arithmetic underpinning the CM construction.

Kronecker symbols, primality, modular square roots, the 4p = u^2 + |D|v^2
version of Cornacchia's algorithm, discriminant factorization into prime
discriminants, and the parameter searches (fixed D / fixed p) that produce
curve orders avoiding small prime factors.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .errors import InternalInvariantError, InvalidParameters

__all__ = [
    "kronecker",
    "is_probable_prime",
    "sqrt_mod_p",
    "cornacchia",
    "split_discriminant",
    "factor_d",
    "Discriminant",
    "CurveOrderParams",
    "validate_params",
    "search_fixed_D",
    "search_fixed_p",
]


def kronecker(a: int, b: int) -> int:
    """Kronecker symbol (a/b), defined for all integers b."""
    if b == 0:
        return 1 if a in (1, -1) else 0
    if b < 0:
        sign = -1 if a < 0 else 1
        return sign * kronecker(a, -b)
    if b % 2 == 0:
        if a % 2 == 0:
            return 0
        k = 0
        while b % 2 == 0:
            b //= 2
            k += 1
        sign = -1 if (k % 2 == 1 and a % 8 in (3, 5)) else 1
        return sign * kronecker(a, b)
    # b odd positive: Jacobi via quadratic reciprocity
    a %= b
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if b % 8 in (3, 5):
                result = -result
        a, b = b, a
        if a % 4 == 3 and b % 4 == 3:
            result = -result
        a %= b
    return result if b == 1 else 0


_SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71]

# Miller-Rabin with these bases is deterministic below 3.3 * 10^24.
_MR_BASES_SMALL = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]


def _miller_rabin(n: int, base: int) -> bool:
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    x = pow(base % n, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(r - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin; deterministic below 3.3e24, 64 fixed bases beyond that."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    if n < 3317044064679887385961981:
        bases = _MR_BASES_SMALL
    else:
        bases = _64_bases()
    return all(_miller_rabin(n, b) for b in bases)


def _64_bases(_cache=[]):
    if not _cache:
        cand = 2
        while len(_cache) < 64:
            if is_probable_prime(cand):  # only hits the small deterministic path
                _cache.append(cand)
            cand += 1
    return _cache


def sqrt_mod_p(a: int, p: int) -> Optional[int]:
    """Square root of a mod p for odd prime p; the smaller root min(r, p-r).

    Returns None when a is a non-residue.  Tonelli-Shanks with a deterministic
    non-residue search, so results are reproducible.
    """
    a %= p
    if a == 0:
        return 0
    if p == 2:
        return a
    if kronecker(a, p) != 1:
        return None
    if p % 4 == 3:
        r = pow(a, (p + 1) // 4, p)
        return min(r, p - r)
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while kronecker(z, p) != -1:
        z += 1
    m, c = s, pow(z, q, p)
    t, r = pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t, r = t * c % p, r * b % p
    return min(r, p - r)


def cornacchia(D: int, p: int) -> Optional[tuple[int, int]]:
    """Solve 4p = u^2 + |D|v^2 with u, v > 0, for D < 0 and prime p > 3.

    Returns (u, v) or None when p is not represented (then the CM method is
    not applicable at this p).
    """
    if D >= 0 or D % 4 not in (0, 1):
        raise InvalidParameters(f"not an imaginary quadratic discriminant: {D}")
    if p <= 3 or not is_probable_prime(p):
        raise InvalidParameters(f"need a prime p > 3, got {p}")
    if kronecker(D, p) != 1:
        return None
    x = sqrt_mod_p(D % p, p)
    if x is None:
        return None
    if (x - D) % 2 != 0:
        x = p - x
    # now x^2 = D (mod 4p); run the Euclidean descent on (2p, x)
    a, b = 2 * p, x
    bound = math.isqrt(4 * p)
    while b > bound:
        a, b = b, a % b
    t = 4 * p - b * b
    if b == 0 or t % (-D) != 0:
        return None
    v2 = t // (-D)
    v = math.isqrt(v2)
    if v * v != v2 or v == 0:
        return None
    return b, v


# --- factorization helpers (trial division + Pollard rho) -------------------


def _pollard_rho(n: int) -> int:
    """A nontrivial factor of composite odd n (Brent's cycle variant)."""
    if n % 2 == 0:
        return 2
    for c in range(1, 50):
        x, y, d = 2, 2, 1
        f = lambda v: (v * v + c) % n
        while d == 1:
            x = f(x)
            y = f(f(y))
            d = math.gcd(abs(x - y), n)
        if d != n:
            return d
    raise InternalInvariantError(f"pollard rho gave up on {n}")  # pragma: no cover


def _factorize(n: int) -> dict[int, int]:
    """Prime factorization of n >= 1 as {prime: exponent}."""
    fac: dict[int, int] = {}
    for p in _SMALL_PRIMES:
        while n % p == 0:
            fac[p] = fac.get(p, 0) + 1
            n //= p
    d = 73
    while d * d <= n and d < 10000:
        while n % d == 0:
            fac[d] = fac.get(d, 0) + 1
            n //= d
        d += 2
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if m == 1:
            continue
        if is_probable_prime(m):
            fac[m] = fac.get(m, 0) + 1
            continue
        g = _pollard_rho(m)
        stack.extend([g, m // g])
    return fac


def split_discriminant(D: int) -> tuple[int, int]:
    """Write D = f^2 * d with d a fundamental discriminant; returns (d, f)."""
    if D >= 0 or D % 4 not in (0, 1):
        raise InvalidParameters(f"not an imaginary quadratic discriminant: {D}")
    fac = _factorize(-D)
    f = 1
    for q, e in fac.items():
        f *= q ** (e // 2)
    d0 = D // (f * f)
    if d0 % 4 == 1:
        d, cond = d0, f
    else:
        # d0 = 2,3 mod 4 forces f even (since D = 0,1 mod 4)
        d, cond = 4 * d0, f // 2
    assert cond * cond * d == D and d % 4 in (0, 1)
    return d, cond


def factor_d(d: int) -> tuple[int, ...]:
    """Factor a fundamental discriminant into prime discriminants q*.

    Odd q* are (-1)^((q-1)/2) q; the even one (if any) is -4, 8 or -8.
    Ordering: +8 first when present, then positive odd ascending, negative odd
    by |q| ascending, and -4/-8 last.  This is the order the integral-basis
    construction expects.
    """
    dd, f = split_discriminant(d)
    if f != 1:
        raise InvalidParameters(f"{d} is not fundamental (conductor {f})")
    odd_q = [q for q in _factorize(-d) if q % 2 == 1]
    odd_stars = [q if q % 4 == 1 else -q for q in odd_q]
    rem = d
    for q in odd_stars:
        rem //= q
    assert rem in (1, -4, 8, -8), (d, rem)
    head = [8] if rem == 8 else []
    tail = [rem] if rem in (-4, -8) else []
    pos = sorted(q for q in odd_stars if q > 0)
    neg = sorted((q for q in odd_stars if q < 0), key=abs)
    out = tuple(head + pos + neg + tail)
    check = 1
    for q in out:
        check *= q
    assert check == d
    return out


@dataclass(frozen=True)
class Discriminant:
    """An imaginary quadratic discriminant with its genus data precomputed."""

    D: int
    d: int  # fundamental part
    f: int  # conductor
    qstars: tuple[int, ...]  # prime discriminants of d, in basis order
    t: int  # number of prime discriminants
    u: int  # how many of them are positive (they come first)
    m: int  # 2^(t-1), the number of genera

    @classmethod
    def from_D(cls, D: int) -> "Discriminant":
        d, f = split_discriminant(D)
        qs = factor_d(d)
        t = len(qs)
        u = sum(1 for q in qs if q > 0)
        return cls(D=D, d=d, f=f, qstars=qs, t=t, u=u, m=1 << (t - 1))

    @property
    def is_fundamental(self) -> bool:
        return self.f == 1


@dataclass(frozen=True)
class CurveOrderParams:
    """One admissible (p, u, v, order) tuple: 4p = u^2 + |D|v^2, order = p+1-u.

    u carries the sign of the trace, so the two quadratic twists show up as
    (u, order) and (-u, order') with order + order' = 2p + 2.
    """

    p: int
    u: int
    v: int
    order: int

    def __post_init__(self):
        assert self.order == self.p + 1 - self.u


def validate_params(D: int, p: int, u: int, v: int) -> Discriminant:
    """Check the CM preconditions for (D, p, u, v); returns the Discriminant."""
    disc = D if isinstance(D, Discriminant) else Discriminant.from_D(D)
    if p <= 3 or not is_probable_prime(p):
        raise InvalidParameters(f"p = {p} is not a prime > 3")
    if 4 * p != u * u - disc.D * v * v:
        raise InvalidParameters(f"4p != u^2 + |D|v^2 for (D,p,u,v)=({disc.D},{p},{u},{v})")
    if v == 0 or math.gcd(u, p) != 1:
        raise InvalidParameters(f"degenerate parameters u={u}, v={v} at p={p}")
    if kronecker(disc.D, p) != 1:
        raise InvalidParameters(f"kronecker({disc.D},{p}) != 1 (p ramifies or is inert, or p | f)")
    assert kronecker(disc.d, p) == 1
    return disc


Predicate = Callable[[int, int], bool]


def _offer(params: CurveOrderParams, predicate: Optional[Predicate]):
    if predicate is None or predicate(params.p, params.order):
        return params
    return None


def search_fixed_D(
    D,
    predicate: Optional[Predicate] = None,
    *,
    p_max: Optional[int] = None,
    p_bits: Optional[int] = None,
    rng: Optional[random.Random] = None,
    budget: int = 200000,
) -> Optional[CurveOrderParams]:
    """Find (p, u, v, order) for a fixed discriminant.

    Exactly one of p_max / p_bits selects the mode:

    * p_max: deterministic scan of primes p <= p_max in ascending order, offering
      the minus order p+1-u before p+1+u.  Meant for small demonstrations, and
      the default (with p_max = budget) when neither bound is given.
    * p_bits: randomized search for p of that bit size.  When D = 5 (mod 8) this
      uses the u = 1 (mod 210), v = 105 (mod 210) walk, which guarantees neither
      p nor the offered order is divisible by 2, 3, 5 or 7; otherwise plain
      rejection sampling, offering both signs.

    predicate(p, order) -> bool filters candidates; None accepts the first one.
    Returns None if the budget runs out.
    """
    disc = D if isinstance(D, Discriminant) else Discriminant.from_D(D)
    if p_max is not None and p_bits is not None:
        raise InvalidParameters("specify at most one of p_max / p_bits")
    if p_max is None and p_bits is None:
        p_max = budget

    if p_max is not None:
        for p in range(5, p_max + 1):
            if not is_probable_prime(p):
                continue
            sol = cornacchia(disc.D, p)
            if sol is None:
                continue
            u, v = sol
            if math.gcd(u, p) != 1:
                continue
            for uu in (u, -u):
                got = _offer(CurveOrderParams(p, uu, v, p + 1 - uu), predicate)
                if got is not None:
                    return got
        return None

    if p_bits < 8:
        raise InvalidParameters("p_bits must be at least 8")
    rng = rng if rng is not None else random.Random(0)
    absD = -disc.D
    lo, hi = 1 << (p_bits - 1), 1 << p_bits
    if disc.D % 8 == 5:
        return _search_210(disc, predicate, rng, budget, lo, hi)
    spent = 0
    while spent < budget:
        target = rng.randrange(lo, hi)
        vmax = math.isqrt(2 * target // absD)
        if vmax < 1:
            raise InvalidParameters(f"|D| too large for {p_bits}-bit primes")
        v = rng.randrange(1, vmax + 1)
        u = math.isqrt(4 * target - absD * v * v)
        # fix parity so u^2 + |D|v^2 = 0 (mod 4); try a couple of neighbours
        for du in (0, 1, 2, 3):
            spent += 1
            uu = u + du
            val = uu * uu + absD * v * v
            if val % 4 != 0:
                continue
            p = val // 4
            if p <= 3 or p % 2 == 0 or uu == 0 or not is_probable_prime(p):
                continue
            for su in (uu, -uu):
                got = _offer(CurveOrderParams(p, su, v, p + 1 - su), predicate)
                if got is not None:
                    return got
    return None


def _search_210(disc, predicate, rng, budget, lo, hi):
    """The 210-walk for D = 5 (mod 8): p and the offered order avoid 2,3,5,7."""
    absD = -disc.D
    spent = 0
    while spent < budget:
        vmax = math.isqrt(2 * lo // absD)
        v0max = max(1, (vmax - 105) // 210 + 1)
        v = 210 * rng.randrange(v0max) + 105
        target = rng.randrange(lo, hi)
        rest = 4 * target - absD * v * v
        if rest < 4:
            continue
        u = 210 * ((math.isqrt(rest) - 1) // 210) + 1
        if u < 1:
            u = 1
        step = 106
        for _ in range(2000):
            spent += 1
            if spent > budget:
                break
            val = u * u + absD * v * v
            assert val % 4 == 0  # u odd, v odd, |D| = 3 (mod 8)
            p = val // 4
            res = u % 210
            assert res in (1, 107)
            if lo <= p < hi and is_probable_prime(p):
                # the good sign flips with the residue of u mod 210
                su = u if res == 1 else -u
                order = p + 1 - su
                assert math.gcd(order, 210) == 1 and math.gcd(p, 210) == 1
                got = _offer(CurveOrderParams(p, su, v, order), predicate)
                if got is not None:
                    return got
            u += step
            step = 210 - step  # alternate +106 / +104
    return None


def search_fixed_p(
    p: int,
    discs: Iterable[int],
    predicate: Optional[Predicate] = None,
) -> Optional[tuple[Discriminant, CurveOrderParams]]:
    """Scan discriminants for one that represents the given prime p.

    Offers the minus order first for each workable D; returns the first
    (Discriminant, CurveOrderParams) the predicate accepts, or None.
    """
    if p <= 3 or not is_probable_prime(p):
        raise InvalidParameters(f"p = {p} is not a prime > 3")
    for D in discs:
        disc = D if isinstance(D, Discriminant) else Discriminant.from_D(D)
        if kronecker(disc.D, p) != 1:
            continue
        sol = cornacchia(disc.D, p)
        if sol is None:
            continue
        u, v = sol
        if math.gcd(u, p) != 1:
            continue
        for uu in (u, -u):
            got = _offer(CurveOrderParams(p, uu, v, p + 1 - uu), predicate)
            if got is not None:
                return disc, got
    return None
