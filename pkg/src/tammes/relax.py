"""Sound linear enclosures of the nonlinear packing relations over interval boxes.

Every nonlinear subexpression f (sin/cos of an angle, products of two or
three enclosed terms) is replaced on a box by a linear form plus a rigorous
remainder interval: C <= k.x - f(x) <= D for every point of the box.  The
trig remainder uses the exact identity

    k.x - f(x) = (k.x0 - f(x0)) - [f''(x0)(1 - cos t) + f'''(x0)(t - sin t)],

t = x - x0, extremized in closed form over |t| <= delta, which is sound for
any half-width below pi (the printed Taylor-tail version bounds the
remainder with the wrong sign; the cos example near 0 violates it).  All
bounds are widened outward by a fixed epsilon as insurance against
floating-point edge violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Literal, Sequence

#: Absolute outward widening applied to every enclosure bound.
OUTWARD = 1e-12

#: Public contract for enclose_trig; wider boxes must be split by the caller.
TRIG_MAX_HALFWIDTH = 1.0

#: Internal assembly keeps emitting (looser but still exact-remainder sound)
#: enclosures up to this half-width; beyond it the constraint is skipped
#: until branching shrinks the box.
TRIG_SOFT_HALFWIDTH = 1.56

INF = math.inf


class EncloseError(ValueError):
    """Enclosure preconditions violated (e.g. box too wide)."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval bounds must be finite")

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def rad(self) -> float:
        return 0.5 * (self.hi - self.lo)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack

    def intersect(self, other: "Interval") -> "Interval | None":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    def scaled(self, c: float) -> "Interval":
        a, b = self.lo * c, self.hi * c
        return Interval(min(a, b), max(a, b))


def interval_cos(iv: Interval) -> Interval:
    """Exact image of cos over an interval (plus outward rounding)."""
    if iv.width >= 2.0 * math.pi:
        return Interval(-1.0, 1.0)
    vals = [math.cos(iv.lo), math.cos(iv.hi)]
    k_lo = math.ceil(iv.lo / (2.0 * math.pi))
    if 2.0 * math.pi * k_lo <= iv.hi:
        vals.append(1.0)
    k_lo = math.ceil((iv.lo - math.pi) / (2.0 * math.pi))
    if 2.0 * math.pi * k_lo + math.pi <= iv.hi:
        vals.append(-1.0)
    return Interval(max(-1.0, min(vals) - OUTWARD), min(1.0, max(vals) + OUTWARD))


def interval_sin(iv: Interval) -> Interval:
    return interval_cos(Interval(iv.lo - math.pi / 2.0, iv.hi - math.pi / 2.0))


@dataclass(frozen=True)
class Enclosure:
    """Sound bounds C <= (linear form) - (expression) <= D on a box.

    For trig enclosures `k` is the single coefficient; product and triple
    enclosures use `ka`, `kb` (and `kc`).
    """

    C: float
    D: float
    k: float | None = None
    ka: float | None = None
    kb: float | None = None
    kc: float | None = None


def _remainder_range(A: float, B: float, delta: float) -> tuple[float, float]:
    """Exact range of A(1 - cos t) + B(t - sin t) over |t| <= delta < pi."""

    def h(t: float) -> float:
        return A * (1.0 - math.cos(t)) + B * (t - math.sin(t))

    cands = [0.0, delta, -delta]
    # h'(t) = 2 sin(t/2) [A cos(t/2) + B sin(t/2)]: one interior root family.
    if B != 0.0:
        t_star = 2.0 * math.atan(-A / B)
        if -delta < t_star < delta:
            cands.append(t_star)
    vals = [h(t) for t in cands]
    return min(vals), max(vals)


def _trig_enclosure(kind: Literal["sin", "cos"], iv: Interval,
                    max_halfwidth: float) -> Enclosure:
    delta = iv.rad
    if delta > max_halfwidth:
        raise EncloseError(
            f"interval half-width {delta:.3f} exceeds {max_halfwidth}; split first"
        )
    x0 = iv.mid
    if kind == "sin":
        f0, k = math.sin(x0), math.cos(x0)
        A, B = -math.sin(x0), -math.cos(x0)
    elif kind == "cos":
        f0, k = math.cos(x0), -math.sin(x0)
        A, B = -math.cos(x0), math.sin(x0)
    else:
        raise ValueError(f"unknown trig kind {kind!r}")
    g0 = k * x0 - f0
    r_lo, r_hi = _remainder_range(A, B, delta)
    return Enclosure(C=g0 - r_hi - OUTWARD, D=g0 - r_lo + OUTWARD, k=k)


def enclose_trig(kind: Literal["sin", "cos"], iv: Interval) -> Enclosure:
    """Sound linear enclosure of sin or cos on a box of half-width <= 1."""
    return _trig_enclosure(kind, iv, TRIG_MAX_HALFWIDTH)


def enclose_product(a: Interval, b: Interval) -> Enclosure:
    """Sound (and tight) enclosure of ka*a + kb*b - a*b on a box.

    With a = a0 + s, b = b0 + t the expression equals a0*b0 - s*t, so the
    width 2*da*db is exact and attained at box corners.
    """
    ka, kb = b.mid, a.mid
    spread = a.rad * b.rad
    base = a.mid * b.mid
    return Enclosure(C=base - spread - OUTWARD, D=base + spread + OUTWARD, ka=ka, kb=kb)


def enclose_triple(a: Interval, b: Interval, c: Interval) -> Enclosure:
    """Sound enclosure of ka*a + kb*b + kc*c - a*b*c on a box.

    The identity value is 2*a0*b0*c0 - (a0*t*u + b0*s*u + c0*s*t + s*t*u);
    each term is bounded by its absolute maximum.
    """
    a0, b0, c0 = a.mid, b.mid, c.mid
    da, db, dc = a.rad, b.rad, c.rad
    spread = abs(a0) * db * dc + abs(b0) * da * dc + abs(c0) * da * db + da * db * dc
    base = 2.0 * a0 * b0 * c0
    return Enclosure(C=base - spread - OUTWARD, D=base + spread + OUTWARD,
                     ka=b0 * c0, kb=a0 * c0, kc=a0 * b0)


@dataclass(frozen=True)
class LinearConstraint:
    """Two-sided linear constraint lo <= sum(coeffs[v] * x_v) <= hi."""

    coeffs: tuple[tuple[int, float], ...]
    lo: float
    hi: float
    label: str = ""

    def __post_init__(self):
        if not any(c != 0.0 for _, c in self.coeffs):
            raise ValueError("constraint needs at least one nonzero coefficient")

    @property
    def relation(self) -> str:
        if self.lo == self.hi:
            return "=="
        if self.lo == -INF:
            return "<="
        if self.hi == INF:
            return ">="
        return "range"

    @staticmethod
    def eq(coeffs: Dict[int, float], rhs: float, label: str = "") -> "LinearConstraint":
        return LinearConstraint(tuple(sorted(coeffs.items())), rhs, rhs, label)

    @staticmethod
    def le(coeffs: Dict[int, float], rhs: float, label: str = "") -> "LinearConstraint":
        return LinearConstraint(tuple(sorted(coeffs.items())), -INF, rhs, label)

    @staticmethod
    def ge(coeffs: Dict[int, float], rhs: float, label: str = "") -> "LinearConstraint":
        return LinearConstraint(tuple(sorted(coeffs.items())), rhs, INF, label)


class AffineForm:
    """Linear combination of variables plus a rigorous constant interval.

    The value of the enclosed expression lies in
    sum(coeffs[v] * x_v) + [lo, hi] for every point of the current box.
    """

    __slots__ = ("coeffs", "lo", "hi")

    def __init__(self, coeffs: Dict[int, float] | None = None,
                 lo: float = 0.0, hi: float = 0.0):
        self.coeffs = dict(coeffs or {})
        self.lo = lo
        self.hi = hi

    @staticmethod
    def variable(v: int) -> "AffineForm":
        return AffineForm({v: 1.0})

    @staticmethod
    def constant(c: float) -> "AffineForm":
        return AffineForm({}, c, c)

    def copy(self) -> "AffineForm":
        return AffineForm(self.coeffs, self.lo, self.hi)

    def __add__(self, other: "AffineForm") -> "AffineForm":
        out = self.copy()
        for v, c in other.coeffs.items():
            out.coeffs[v] = out.coeffs.get(v, 0.0) + c
        out.lo += other.lo
        out.hi += other.hi
        return out

    def __sub__(self, other: "AffineForm") -> "AffineForm":
        return self + other.scaled(-1.0)

    def scaled(self, c: float) -> "AffineForm":
        lo, hi = (self.lo * c, self.hi * c) if c >= 0 else (self.hi * c, self.lo * c)
        return AffineForm({v: k * c for v, k in self.coeffs.items()}, lo, hi)

    def shifted(self, lo: float, hi: float) -> "AffineForm":
        out = self.copy()
        out.lo += lo
        out.hi += hi
        return out

    def value_range(self, ivs: Dict[int, Interval]) -> Interval:
        lo, hi = self.lo, self.hi
        for v, c in self.coeffs.items():
            term = ivs[v].scaled(c)
            lo += term.lo
            hi += term.hi
        return Interval(lo, hi)

    def contains_zero_constraint(self, label: str = "") -> LinearConstraint | None:
        """Constraint expressing 0 in the affine range: -hi <= sum c.x <= -lo."""
        coeffs = {v: c for v, c in self.coeffs.items() if c != 0.0}
        if not coeffs:
            return None
        return LinearConstraint(tuple(sorted(coeffs.items())), -self.hi, -self.lo, label)


def trig_affine(kind: Literal["sin", "cos"], var: int, iv: Interval,
                scale: float = 1.0,
                max_halfwidth: float = TRIG_SOFT_HALFWIDTH,
                memo: dict | None = None) -> AffineForm:
    """Affine form enclosing sin/cos(scale * x) for x in iv.

    `memo` caches enclosures within one assembly round, where the same
    variable is linearized by many constraints over an unchanged interval.
    """
    if memo is not None:
        key = (kind, var, scale)
        hit = memo.get(key)
        if hit is not None:
            return hit.copy()
    arg = iv.scaled(scale)
    enc = _trig_enclosure(kind, arg, max_halfwidth)
    # k*arg - f(arg) in [C, D]  =>  f(arg) in k*scale*x + [-D, -C]
    out = AffineForm({var: enc.k * scale}, -enc.D, -enc.C)
    if memo is not None:
        memo[key] = out.copy()
    return out


def product_affine(fa: AffineForm, ia: Interval, fb: AffineForm, ib: Interval) -> AffineForm:
    """Affine form enclosing the product of two enclosed expressions."""
    enc = enclose_product(ia, ib)
    # a*b in ka*a + kb*b - [C, D]
    return (fa.scaled(enc.ka) + fb.scaled(enc.kb)).shifted(-enc.D, -enc.C)


def triple_affine(fa: AffineForm, ia: Interval, fb: AffineForm, ib: Interval,
                  fc: AffineForm, ic: Interval) -> AffineForm:
    enc = enclose_triple(ia, ib, ic)
    out = fa.scaled(enc.ka) + fb.scaled(enc.kb) + fc.scaled(enc.kc)
    return out.shifted(-enc.D, -enc.C)


@dataclass(frozen=True)
class TriangleVars:
    """Variable indices of one spherical triangle: sides and opposite angles.

    Any side entry may repeat (e.g. two sides equal to the common edge
    length); angles[i] is opposite sides[i].
    """

    sides: tuple[int, int, int]
    angles: tuple[int, int, int]


def _law_constraint(ivs: Dict[int, Interval],
                    opp: int, s1: int, s2: int, ang: int,
                    dual: bool, label: str,
                    memo: dict | None = None) -> LinearConstraint | None:
    """One linearized law-of-cosines instance, or None if the box is too wide.

    Side form:  cos(opp) = cos(s1) cos(s2) + sin(s1) sin(s2) cos(ang)
    Dual form:  cos(opp) = -cos(s1) cos(s2) + sin(s1) sin(s2) cos(ang)
    (the dual form is the polar-triangle law with angle/side roles swapped).
    """
    try:
        cos_opp = trig_affine("cos", opp, ivs[opp], memo=memo)
        cos_1 = trig_affine("cos", s1, ivs[s1], memo=memo)
        cos_2 = trig_affine("cos", s2, ivs[s2], memo=memo)
        sin_1 = trig_affine("sin", s1, ivs[s1], memo=memo)
        sin_2 = trig_affine("sin", s2, ivs[s2], memo=memo)
        cos_g = trig_affine("cos", ang, ivs[ang], memo=memo)
    except EncloseError:
        return None
    i_c1, i_c2 = interval_cos(ivs[s1]), interval_cos(ivs[s2])
    i_s1, i_s2 = interval_sin(ivs[s1]), interval_sin(ivs[s2])
    i_cg = interval_cos(ivs[ang])
    prod = product_affine(cos_1, i_c1, cos_2, i_c2)
    if dual:
        prod = prod.scaled(-1.0)
    trip = triple_affine(sin_1, i_s1, sin_2, i_s2, cos_g, i_cg)
    form = cos_opp - prod - trip
    return form.contains_zero_constraint(label)


def linearize_spherical_triangle(tri: TriangleVars, ivs: Dict[int, Interval],
                                 tag: str = "",
                                 memo: dict | None = None) -> list[LinearConstraint]:
    """Six linearized law-of-cosines pairs for one triangle on a box.

    Three side instances (each side against its opposite angle) and three
    polar-dual instances (each angle against its opposite side); instances
    whose enclosures are not yet meaningful on the box are omitted.
    """
    out: list[LinearConstraint] = []
    s, a = tri.sides, tri.angles
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        c = _law_constraint(ivs, s[i], s[j], s[k], a[i], False, f"{tag}law{i}", memo)
        if c is not None:
            out.append(c)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        c = _law_constraint(ivs, a[i], a[j], a[k], s[i], True, f"{tag}dual{i}", memo)
        if c is not None:
            out.append(c)
    return out


def linearize_triangle(sides: Sequence[Interval], angle: Interval) -> list[LinearConstraint]:
    """Linear constraints for one (sides, opposite-angle) pairing of the law.

    Variables are indexed 0, 1, 2 for the sides and 3 for the angle; the
    angle is opposite side 0.  Emitted for the caller-specified pairing;
    assembly code calls this once per side/angle pairing of each triangle.
    """
    ivs = {0: sides[0], 1: sides[1], 2: sides[2], 3: angle}
    c = _law_constraint(ivs, 0, 1, 2, 3, False, "law")
    return [c] if c is not None else []
