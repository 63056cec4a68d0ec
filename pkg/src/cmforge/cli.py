"""Command-line front end.

JSON-lines on stdout; integers that do not fit a double are emitted as
decimal strings.  Exit codes: 0 ok, 2 invalid parameters (including failed
verification), 3 precision budget exhausted, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import traceback

from .arith import Discriminant, cornacchia, is_probable_prime, validate_params
from .approx import approx_quality, run_approx
from .classpoly import class_poly_divisor, class_poly_full, coset_product_check
from .curve import (gen_curve, make_curve, naive_count, random_point,
                    scalar_mul)
from .errors import (CMForgeError, InternalInvariantError, InvalidParameters,
                     PrecisionExhausted)
from .genusfield import IMAG_PART, REAL_PART, build_basis, build_mpair
from .modfns import InvariantKind

_BIG = 1 << 53


def _jsonable(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, int):
        return str(x) if abs(x) >= _BIG else x
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (str, float)):
        return x
    return str(x)


def _emit(obj, out):
    out.write(json.dumps(_jsonable(obj)) + "\n")


def _as_int(x, what):
    try:
        return int(x)
    except (TypeError, ValueError):
        raise InvalidParameters(f"{what} must be an integer, got {x!r}")


# ---------------------------------------------------------------------------

def cmd_params(args, out):
    if (args.disc is None) == (args.fixed_p is None):
        raise InvalidParameters("give exactly one of --disc / --fixed-p")
    rows = 0
    if args.disc is not None:
        D = args.disc
        Discriminant.from_D(D)
        lo = max(5, args.p_min)
        for p in range(lo, args.p_max + 1):
            if not is_probable_prime(p):
                continue
            sol = cornacchia(D, p)
            if sol is None:
                continue
            u, v = sol
            _emit({"D": D, "p": p, "u": u, "v": v,
                   "orders": [p + 1 - u, p + 1 + u]}, out)
            rows += 1
    else:
        p = args.fixed_p
        if p <= 3 or not is_probable_prime(p):
            raise InvalidParameters(f"--fixed-p needs a prime > 3, got {p}")
        for D in range(-3, -args.disc_max - 1, -1):
            if D % 4 not in (0, 1):
                continue
            sol = cornacchia(D, p)
            if sol is None:
                continue
            u, v = sol
            _emit({"D": D, "p": p, "u": u, "v": v,
                   "orders": [p + 1 - u, p + 1 + u]}, out)
            rows += 1
    return 0


def cmd_classpoly(args, out):
    kind = InvariantKind.parse(args.invariant)
    if args.genus_divisor:
        poly = class_poly_divisor(args.disc, kind, max_bits=args.max_bits)
    else:
        poly = class_poly_full(args.disc, kind, max_bits=args.max_bits)
    blob = poly.to_json()
    if args.coset_check:
        ok = coset_product_check(args.disc, kind)
        if not ok:
            raise InternalInvariantError(
                f"coset product check failed for D={args.disc}")
        blob["coset_check"] = True
    _emit(blob, out)
    return 0


def _order_candidates(D, p, u, v):
    """All (u-hat, v-hat) giving admissible orders p + 1 - u-hat."""
    cands = [(u, v), (-u, v)]
    if D == -4:
        cands += [(2 * v, u // 2), (-2 * v, u // 2)]
    elif D == -3:
        for uu, vv in (((u + 3 * v) // 2, abs(u - v) // 2),
                       ((u - 3 * v) // 2, (u + v) // 2)):
            cands += [(uu, vv), (-uu, vv)]
    return cands


def cmd_gencurve(args, out):
    D, p = args.disc, args.prime
    sol = cornacchia(D, p)
    if sol is None:
        raise InvalidParameters(f"4p = u^2 + |D|v^2 has no solution for (D,p)=({D},{p})")
    u0, v0 = sol
    chosen = None
    for uu, vv in _order_candidates(D, p, u0, v0):
        if p + 1 - uu == args.order:
            chosen = (uu, abs(vv))
            break
    if chosen is None:
        orders = sorted({p + 1 - uu for uu, _ in _order_candidates(D, p, u0, v0)})
        raise InvalidParameters(
            f"order {args.order} not admissible at (D,p)=({D},{p}); valid: {orders}")
    kind = InvariantKind.parse(args.invariant)
    res = gen_curve(D, p, chosen[0], chosen[1], kind=kind, path=args.path,
                    seed=args.seed, max_bits=args.max_bits)
    c = res["curve"]
    _emit({"p": c.p, "a": c.a, "b": c.b, "j": res["j"], "order": res["order"],
           "D": D, "u": chosen[0], "v": chosen[1], "invariant": str(kind),
           "path": res["transcript"]["path"],
           "transcript": res["transcript"]}, out)
    return 0


def cmd_approx(args, out):
    d = Discriminant.from_D(args.disc)
    basis = build_basis(d)
    variant = REAL_PART if args.variant == "real" else IMAG_PART
    mpair = build_mpair(basis, variant)
    trace = []
    run = run_approx(d, mpair, N0=args.threshold, trace=trace.append)
    for row in trace:
        _emit(row, out)
    q = approx_quality(run)
    _emit({"threshold": args.threshold, "iterations": run.iters,
           "A": list(run.A), "Z": q["Z"], "ok": q["ok"]}, out)
    if not q["ok"]:
        raise InternalInvariantError("approximation quality bounds violated")
    return 0


def cmd_verify(args, out):
    if args.file and args.file != "-":
        with open(args.file) as fh:
            text = fh.read()
    else:
        text = sys.stdin.read()
    try:
        blob = json.loads(text.strip().splitlines()[0])
    except (json.JSONDecodeError, IndexError):
        raise InvalidParameters("verify needs a curve JSON object")
    p = _as_int(blob.get("p"), "p")
    a = _as_int(blob.get("a"), "a")
    b = _as_int(blob.get("b"), "b")
    j = _as_int(blob.get("j"), "j")
    order = _as_int(blob.get("order"), "order")
    D = _as_int(blob.get("D"), "D")
    u = _as_int(blob.get("u"), "u")
    v = _as_int(blob.get("v"), "v")
    validate_params(D, p, u, v)
    if order != p + 1 - u:
        raise InvalidParameters(f"order {order} != p + 1 - u = {p + 1 - u}")
    curve = make_curve(p, a, b)
    if curve.j_invariant() != j % p:
        raise InvalidParameters("stated j does not match the curve")
    if p <= 10 ** 4:
        n = naive_count(curve)
        if n != order:
            raise InvalidParameters(f"recount gives {n}, not {order}")
        method = "naive-count"
    else:
        if (p + 1 - order) ** 2 > 4 * p:
            raise InvalidParameters("order outside the Hasse interval")
        rng = random.Random(args.seed)
        for _ in range(10):
            P = random_point(curve, rng)
            if scalar_mul(order, P, curve) is not None:
                raise InvalidParameters(f"order {order} does not kill a random point")
        method = "10-point"
    _emit({"verified": True, "p": p, "order": order, "method": method}, out)
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(
        prog="cmforge",
        description="CM curves with prescribed order via genus-field class "
                    "polynomial divisors")
    ap.add_argument("--seed", type=int, default=0, help="rng seed (default 0)")
    ap.add_argument("--threads", type=int, default=1,
                    help="reserved; must be >= 1, execution is sequential")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("params", help="admissible (p, u, v, order) tuples")
    sp.add_argument("--disc", type=int)
    sp.add_argument("--fixed-p", type=int)
    sp.add_argument("--p-min", type=int, default=5)
    sp.add_argument("--p-max", type=int, default=1000)
    sp.add_argument("--disc-max", type=int, default=200)
    sp.set_defaults(fn=cmd_params)

    sp = sub.add_parser("classpoly", help="class polynomial or genus divisor")
    sp.add_argument("--disc", type=int, required=True)
    sp.add_argument("--invariant", default="j")
    sp.add_argument("--genus-divisor", action="store_true")
    sp.add_argument("--coset-check", action="store_true")
    sp.add_argument("--max-bits", type=int)
    sp.set_defaults(fn=cmd_classpoly)

    sp = sub.add_parser("gencurve", help="curve with prescribed order")
    sp.add_argument("--disc", type=int, required=True)
    sp.add_argument("--prime", type=int, required=True)
    sp.add_argument("--order", type=int, required=True)
    sp.add_argument("--invariant", default="j")
    sp.add_argument("--path", choices=("auto", "divisor", "full"), default="auto")
    sp.add_argument("--max-bits", type=int)
    sp.set_defaults(fn=cmd_gencurve)

    sp = sub.add_parser("approx", help="continued-fraction approximation trace")
    sp.add_argument("--disc", type=int, required=True)
    sp.add_argument("--threshold", type=int, required=True)
    sp.add_argument("--variant", choices=("real", "imag"), default="real")
    sp.set_defaults(fn=cmd_approx)

    sp = sub.add_parser("verify", help="independently recheck a curve JSON")
    sp.add_argument("file", nargs="?", help="file or - for stdin")
    sp.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    out = sys.stdout
    try:
        if args.threads < 1:
            raise InvalidParameters(f"--threads must be >= 1, got {args.threads}")
        return args.fn(args, out)
    except (InvalidParameters,) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except PrecisionExhausted as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except CMForgeError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 4
    except Exception:
        traceback.print_exc()
        return 4


if __name__ == "__main__":
    sys.exit(main())
