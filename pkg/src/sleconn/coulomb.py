"""Contour-integral solutions of the null-state system: contour planning,
integrand assembly, numerical evaluation, and the closed forms at kappa = 4/r.

A solution is indexed by an exterior arc diagram; every arc except the one
ending at the conjugate-charge point carries one integration contour.  In the
dense phase (kappa > 4) contours are simple curves bent into the upper half
plane; otherwise they are Pochhammer double loops, evaluated through the
finite-radius circle/circle/segment decomposition.

Ordering convention for the integrand: every difference whose sign is fixed
along the base configuration is oriented positive; sign-changing differences
(which occur only for nested contours) are oriented positive at the contour
anchor corner and continued along the path.  This reproduces the real-valued
prescription, which the realness checks and the kappa = 6 identity pin down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy

from . import cft
from .diagrams import ArcDiagram, enumerate_diagrams
from .quadrature import (
    ContourGeom,
    Factor,
    QuadratureError,
    iterated_integral,
    line_integral_endpoint_powers,
)


class NeutralityError(AssertionError):
    pass


class RealnessError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Configuration:
    """Strictly increasing marked points plus the conjugate-charge index."""

    points: tuple[float, ...]
    c: int = -1  # -1 means the default, the last point

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2 or len(pts) % 2:
            raise ValueError(f"need an even number (>= 2) of points, got {len(pts)}")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError(f"points must be strictly increasing: {pts}")
        if self.c == -1:
            object.__setattr__(self, "c", len(pts))
        if not 1 <= self.c <= len(pts):
            raise ValueError(f"conjugate index {self.c} out of range")

    @property
    def n_pairs(self) -> int:
        return len(self.points) // 2


@dataclass(frozen=True)
class PlannedContour:
    endpoints: tuple[int, int]      # 1-based point indices, left < right
    kind: str                       # 'simple_bent' or 'pochhammer'
    depth: int                      # nesting depth, 0 = outermost
    parent: int | None              # index into ContourPlan.contours


@dataclass(frozen=True)
class ContourPlan:
    n_pairs: int
    c: int
    contours: tuple[PlannedContour, ...]   # sorted by left endpoint
    eval_order: tuple[int, ...]            # outermost first

    @property
    def n_contours(self) -> int:
        return len(self.contours)


@dataclass(frozen=True)
class IntegrandSpec:
    """Powers of one Coulomb gas integrand, with exact rational bookkeeping.

    Every power is a + b/kappa; the pairs below store (b, a) as Fractions so
    the neutrality sum per integration variable is checked exactly.
    """

    kappa: float
    n_pairs: int
    c: int
    betas: tuple[float, ...]
    gamma: float
    external_pair_power: float
    external_conjugate_power: float

    def neutrality_residual(self) -> Fraction:
        """Exact sum of powers seen by one screening variable, plus two."""
        n, m = self.n_pairs, self.n_pairs - 1
        beta = (Fraction(-4), Fraction(0))
        beta_c = (Fraction(12), Fraction(-2))
        gamma = (Fraction(8), Fraction(0))
        inv_k = (2 * n - 1) * beta[0] + beta_c[0] + (m - 1) * gamma[0]
        const = (2 * n - 1) * beta[1] + beta_c[1] + (m - 1) * gamma[1]
        return inv_k, const + 2


def build_integrand(config: Configuration, kappa) -> IntegrandSpec:
    k = cft._kap(kappa)
    n = config.n_pairs
    betas = tuple(
        12.0 / k - 2.0 if l == config.c else -4.0 / k
        for l in range(1, 2 * n + 1)
    )
    spec = IntegrandSpec(
        kappa=k,
        n_pairs=n,
        c=config.c,
        betas=betas,
        gamma=8.0 / k,
        external_pair_power=2.0 / k,
        external_conjugate_power=1.0 - 6.0 / k,
    )
    if n > 1:
        coeff, const = spec.neutrality_residual()
        if coeff != 0 or const != 0:
            raise NeutralityError(
                f"screening-variable power sum is not -2: {coeff}/kappa + {const - 2}"
            )
    return spec


def plan_contours(diagram: ArcDiagram, c: int, kappa) -> ContourPlan:
    k = cft._kap(kappa)
    if not 1 <= c <= 2 * diagram.n_pairs:
        raise ValueError(f"conjugate index {c} out of range")
    kind = "simple_bent" if k > 4.0 else "pochhammer"
    spans = [(a, b) for a, b in diagram.arcs() if c not in (a, b)]
    spans.sort()
    parents: list[int | None] = []
    depths: list[int] = []
    for i, (a, b) in enumerate(spans):
        enclosing = [
            j for j, (a2, b2) in enumerate(spans) if a2 < a and b < b2
        ]
        depths.append(len(enclosing))
        parents.append(
            max(enclosing, key=lambda j: spans[j][0]) if enclosing else None
        )
    contours = tuple(
        PlannedContour(endpoints=(a, b), kind=kind, depth=depths[i], parent=parents[i])
        for i, (a, b) in enumerate(spans)
    )
    order = tuple(sorted(range(len(spans)), key=lambda i: (depths[i], spans[i][0])))
    return ContourPlan(diagram.n_pairs, c, contours, order)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    imag_residual: float
    evaluations: int


@dataclass(frozen=True)
class QuadratureOptions:
    n_base: int = 80
    n_max: int = 4000
    rel_tol: float = 1e-9
    imag_tol: float = 1e-6
    # 'gj': branch-tracked Gauss-Jacobi; 'adaptive': substituted Gauss-Kronrod
    # (single simple contour only); 'auto': GJ with adaptive takeover when an
    # external branch point sits close to a contour endpoint
    engine: str = "auto"


DEFAULT_OPTS = QuadratureOptions()


def _heights(plan: ContourPlan, x: tuple[float, ...]) -> list[float]:
    h = [0.0] * plan.n_contours
    for i, ct in enumerate(plan.contours):
        a, b = ct.endpoints
        inside = [
            x[l - 1]
            for l in range(1, len(x) + 1)
            if l not in ct.endpoints and x[a - 1] < x[l - 1] < x[b - 1]
        ]
        if inside:
            gap_l = min(inside) - x[a - 1]
            gap_r = x[b - 1] - max(inside)
            h[i] = 0.5 * min(gap_l, gap_r, 0.5 * (x[b - 1] - x[a - 1]))
    return h


def contour_geometries(
    plan: ContourPlan, config: Configuration, kappa, normalized_eps: float | None = None
) -> list[ContourGeom]:
    """Contour geometry plus per-level factor lists, in evaluation order."""
    k = cft._kap(kappa)
    x = config.points
    spec = build_integrand(config, kappa)
    heights = _heights(plan, x)
    max_depth = max((c.depth for c in plan.contours), default=0)
    gaps = [b - a for a, b in zip(x, x[1:])]
    eps = 0.1 * min(gaps) if gaps else 0.0
    if normalized_eps is not None:
        eps = normalized_eps

    geoms: list[ContourGeom] = []
    level_of: dict[int, int] = {}
    for level, ci in enumerate(plan.eval_order):
        ct = plan.contours[ci]
        ia, ib = ct.endpoints
        a, b = x[ia - 1], x[ib - 1]
        beta = -4.0 / k
        factors = []
        for l in range(1, 2 * config.n_pairs + 1):
            if l in (ia, ib):
                continue
            is_endpoint_of_other = any(
                l in plan.contours[cj].endpoints for cj in plan.eval_order
            )
            if not is_endpoint_of_other and a < x[l - 1] < b:
                raise NotImplementedError(
                    "free branch point inside a contour interval; move the "
                    "conjugate charge or use the default c = 2N"
                )
            orient = +1 if x[l - 1] < a else -1
            factors.append(
                Factor(power=spec.betas[l - 1], orient=orient, z=x[l - 1])
            )
        for cj, lv in level_of.items():
            # pair factor (u_p - u_q), p the contour with the larger left
            # endpoint; positive at the anchor corner
            a2 = x[plan.contours[cj].endpoints[0] - 1]
            orient = +1 if a > a2 else -1
            factors.append(
                Factor(power=spec.gamma, orient=orient, kind="pair", other=lv)
            )
        geoms.append(
            ContourGeom(
                a=a,
                b=b,
                rank=1 + max_depth - ct.depth,
                beta_a=beta,
                beta_b=beta,
                height=heights[ci],
                kind="chord" if ct.kind == "simple_bent" else "pochhammer",
                eps=eps,
                factors=factors,
            )
        )
        level_of[ci] = level
    return geoms


def external_product(config: Configuration, kappa) -> float:
    """The non-integrated prefactor, each difference ordered positive."""
    k = cft._kap(kappa)
    x, c = config.points, config.c
    log_total = 0.0
    for i in range(1, 2 * config.n_pairs + 1):
        for j in range(i + 1, 2 * config.n_pairs + 1):
            if c in (i, j):
                log_total += (1.0 - 6.0 / k) * math.log(abs(x[j - 1] - x[i - 1]))
            else:
                log_total += (2.0 / k) * math.log(x[j - 1] - x[i - 1])
    return math.exp(log_total)


def _as_diagram(theta, n_pairs: int) -> ArcDiagram:
    if isinstance(theta, ArcDiagram):
        return theta
    diagrams = enumerate_diagrams(n_pairs)
    if not 1 <= int(theta) <= len(diagrams):
        raise ValueError(f"theta must be in 1..{len(diagrams)}, got {theta}")
    return diagrams[int(theta) - 1]


def evaluate_F(
    theta,
    kappa,
    x,
    c: int | None = None,
    normalized: bool = False,
    opts: QuadratureOptions = DEFAULT_OPTS,
) -> QuadratureResult:
    """The contour-integral basis element F_theta(kappa | x).

    ``theta`` is a 1-based index into the canonical diagram enumeration or an
    ArcDiagram.  ``normalized=True`` divides out the overall fugacity factor
    (the n -> 0 regularized element, needed when 8/kappa is an odd integer).
    """
    k = cft._kap(kappa)
    config = x if isinstance(x, Configuration) else Configuration(tuple(x), c or -1)
    n = config.n_pairs
    diagram = _as_diagram(theta, n)
    plan = plan_contours(diagram, config.c, k)
    dense = k > 4.0
    replacements = (n - 1) if dense else 0
    pref = cft.basis_prefactor(k, n, replacements)
    if normalized:
        pref = _normalized_prefactor(k, n, replacements)
    ext = external_product(config, k)

    if plan.n_contours == 0:
        val = pref * ext
        return QuadratureResult(val, 0.0, 0.0, 0)

    adaptive_ok = plan.n_contours == 1 and dense
    if opts.engine == "adaptive":
        return _evaluate_adaptive(plan, config, k, pref * ext, opts)
    if opts.engine == "auto" and adaptive_ok and _tight_clearance(plan, config):
        return _evaluate_adaptive(plan, config, k, pref * ext, opts)

    geoms = contour_geometries(plan, config, k)
    try:
        raw, err, neval = iterated_integral(
            geoms, n_base=opts.n_base, n_max=opts.n_max, rel_tol=opts.rel_tol
        )
    except QuadratureError:
        if opts.engine == "auto" and adaptive_ok:
            return _evaluate_adaptive(plan, config, k, pref * ext, opts)
        raise
    total = pref * ext * raw
    imag = abs(total.imag)
    if imag > opts.imag_tol * max(1.0, abs(total)):
        raise RealnessError(
            f"imaginary residual {imag:.3e} exceeds tolerance for |F|={abs(total):.3e}"
        )
    return QuadratureResult(total.real, abs(pref * ext) * err, imag, neval)


def _tight_clearance(plan: ContourPlan, config: Configuration, frac: float = 0.05) -> bool:
    """True when an external branch point crowds a contour endpoint."""
    x = config.points
    for ct in plan.contours:
        ia, ib = ct.endpoints
        a, b = x[ia - 1], x[ib - 1]
        span = b - a
        for l in range(1, len(x) + 1):
            if l in (ia, ib):
                continue
            if min(abs(x[l - 1] - a), abs(x[l - 1] - b)) < frac * span:
                return True
    return False


def _normalized_prefactor(k: float, n_pairs: int, replacements: int) -> float:
    """basis prefactor with the outer fugacity factor dropped (n**-1 F)."""
    if n_pairs == 1:
        return 1.0
    import mpmath

    with mpmath.workdps(40):
        kk = mpmath.mpf(k)
        sin4 = mpmath.sin(4 * mpmath.pi / kk)
        nk = -2 * mpmath.cos(4 * mpmath.pi / kk)
        r8 = 8.0 / k
        if abs(r8 - round(r8)) < 1e-13 and round(r8) % 2 == 1:
            r = round(r8)
            g1 = mpmath.pi * mpmath.sin(mpmath.pi * r / 2) / mpmath.factorial(r - 2)
        else:
            g1 = nk * mpmath.gamma(2 - 8 / kk)
        r4 = 4.0 / k
        if abs(r4 - round(r4)) < 1e-13:
            g2 = mpmath.pi / mpmath.factorial(round(r4) - 1)
        else:
            g2 = sin4 * mpmath.gamma(1 - 4 / kk)
        m = n_pairs - 1
        return float((g1 / (4 * g2 * g2)) ** m * (4 * sin4 * sin4) ** replacements)


def _evaluate_adaptive(plan, config, k, outer_factor, opts) -> QuadratureResult:
    """Independent engine: real adaptive quadrature after substitution.

    Only the single-contour dense case is supported; it exists to cross-check
    the branch-tracked engine through a genuinely different code path.
    """
    if plan.n_contours != 1 or plan.contours[0].kind != "simple_bent":
        raise QuadratureError("adaptive oracle engine handles one simple contour only")
    geom = contour_geometries(plan, config, k)[0]
    if any(f.kind != "point" for f in geom.factors):
        raise QuadratureError("adaptive oracle engine is single-variable")

    def g(u):
        out = np.ones_like(u)
        for f in geom.factors:
            base = (u - f.z.real) if f.orient > 0 else (f.z.real - u)
            out = out * base**f.power
        return out

    val, err, neval = line_integral_endpoint_powers(
        g, geom.a, geom.b, geom.beta_a, geom.beta_b, rel_tol=opts.rel_tol
    )
    return QuadratureResult(outer_factor * val, abs(outer_factor) * err, 0.0, neval)


def integrate_contour(
    spec: IntegrandSpec,
    plan: ContourPlan,
    m: int,
    x,
    fixed: dict[int, complex] | None = None,
    opts: QuadratureOptions = DEFAULT_OPTS,
) -> QuadratureResult:
    """One contour integral of the planned family, other variables held fixed.

    ``m`` indexes ``plan.contours``; ``fixed`` maps other contour indices to
    (real or complex) values treated as extra branch points of the integrand.
    """
    x = tuple(float(v) for v in x)
    ct = plan.contours[m]
    ia, ib = ct.endpoints
    a, b = x[ia - 1], x[ib - 1]
    beta = -4.0 / spec.kappa
    factors = []
    for l in range(1, 2 * spec.n_pairs + 1):
        if l in (ia, ib):
            continue
        orient = +1 if x[l - 1] < a else -1
        factors.append(Factor(power=spec.betas[l - 1], orient=orient, z=x[l - 1]))
    for j, u in (fixed or {}).items():
        a2 = x[plan.contours[j].endpoints[0] - 1]
        orient = +1 if a > a2 else -1
        factors.append(Factor(power=spec.gamma, orient=orient, z=complex(u)))
    gaps = [q - p for p, q in zip(x, x[1:])]
    geom = ContourGeom(
        a=a, b=b, rank=1, beta_a=beta, beta_b=beta,
        kind="chord" if ct.kind == "simple_bent" else "pochhammer",
        eps=0.1 * min(gaps), factors=factors,
    )
    val, err, neval = iterated_integral(
        [geom], n_base=opts.n_base, n_max=opts.n_max, rel_tol=opts.rel_tol
    )
    return QuadratureResult(val.real, err, abs(val.imag), neval)


# ---------------------------------------------------------------------------
# closed forms at kappa = 4/r
# ---------------------------------------------------------------------------

MAX_CLOSED_FORM_ORDER = 3


def evaluate_F_closed(theta, r: int, x) -> float:
    """F_theta at kappa = 4/r exactly, via residues of the integer-power poles.

    Each screening variable localizes at the endpoints of its contour; the
    value is a signed sum over endpoint assignments of (r-1)-th derivatives of
    the ordered pole-free integrand.  Supported for r <= 3.
    """
    if not 1 <= r <= MAX_CLOSED_FORM_ORDER:
        raise ValueError(f"supported derivative orders are r in 1..{MAX_CLOSED_FORM_ORDER}")
    x = tuple(float(v) for v in x)
    n = len(x) // 2
    diagram = _as_diagram(theta, n)
    k = 4.0 / r
    config = Configuration(x)
    plan = plan_contours(diagram, config.c, k)
    m = plan.n_contours

    nk = 2.0 * (-1.0) ** (r + 1)  # fugacity at 4/r
    per_var = nk * math.factorial(r - 1) / (2.0 * math.factorial(2 * r - 2))
    ext = external_product(config, k)
    scale = nk * per_var**m * ext
    if m == 0:
        return scale

    us = sympy.symbols(f"u1:{m + 1}")
    endpoints = [plan.contours[plan.eval_order[lv]].endpoints for lv in range(m)]
    lefts = [x[ia - 1] for ia, _ in endpoints]

    total = 0.0
    for choice in range(2**m):
        sides = [(choice >> j) & 1 for j in range(m)]  # 0 = left, 1 = right
        sign = 1.0
        for side in sides:
            if side:
                sign *= -((-1.0) ** r)
        expr = sympy.Integer(1)
        for lv in range(m):
            ia, ib = endpoints[lv]
            a, b = x[ia - 1], x[ib - 1]
            u = us[lv]
            # non-evaluated endpoint factor
            if sides[lv] == 0:
                expr *= (b - u) ** (-r)
            else:
                expr *= (u - a) ** (-r)
            for l in range(1, 2 * n + 1):
                if l in (ia, ib):
                    continue
                power = 3 * r - 2 if l == config.c else -r
                base = (u - x[l - 1]) if x[l - 1] < a else (x[l - 1] - u)
                expr *= base**power
        for lv1 in range(m):
            for lv2 in range(lv1 + 1, m):
                hi = lv1 if lefts[lv1] > lefts[lv2] else lv2
                lo = lv2 if hi == lv1 else lv1
                expr *= (us[hi] - us[lo]) ** (2 * r)
        for lv in range(m):
            expr = sympy.diff(expr, us[lv], r - 1)
        subs = {
            us[lv]: x[endpoints[lv][sides[lv]] - 1] for lv in range(m)
        }
        total += sign * float(expr.subs(subs))
    return scale * total


def kappa6_identity(n_pairs: int, x, arcs=None, opts: QuadratureOptions = DEFAULT_OPTS):
    """Both sides of the kappa = 6 integral identity over 2N-1 points.

    lhs: the (N-1)-fold contour integral of the pure kappa = 6 integrand over
    simple contours pairwise connecting all but one of the points; rhs: the
    gamma-function closed form times the ordered power product.  ``arcs``
    optionally picks the contour family (defaults to (x1,x2), (x3,x4), ...).
    """
    if n_pairs not in (2, 3):
        raise ValueError("identity check supported for 2 or 3 pairs")
    x = tuple(float(v) for v in x)
    if len(x) != 2 * n_pairs - 1:
        raise ValueError(f"need {2 * n_pairs - 1} points, got {len(x)}")
    if arcs is None:
        arcs = [(2 * i + 1, 2 * i + 2) for i in range(n_pairs - 1)]
    beta, gamma = -2.0 / 3.0, 4.0 / 3.0

    spans = sorted(arcs)
    depths = [sum(1 for a2, b2 in spans if a2 < a and b < b2) for a, b in spans]
    order = sorted(range(len(spans)), key=lambda i: (depths[i], spans[i][0]))
    max_depth = max(depths)
    geoms = []
    level_of = {}
    for level, ci in enumerate(order):
        ia, ib = spans[ci]
        a, b = x[ia - 1], x[ib - 1]
        inside = [v for v in x if a < v < b and v not in (x[ia - 1], x[ib - 1])]
        height = 0.0
        if inside:
            height = 0.5 * min(min(inside) - a, b - max(inside), 0.5 * (b - a))
        factors = []
        for l in range(1, len(x) + 1):
            if l in (ia, ib):
                continue
            orient = +1 if x[l - 1] < a else -1
            factors.append(Factor(power=beta, orient=orient, z=x[l - 1]))
        for cj, lv in level_of.items():
            a2 = x[spans[cj][0] - 1]
            factors.append(
                Factor(power=gamma, orient=+1 if a > a2 else -1, kind="pair", other=lv)
            )
        geoms.append(
            ContourGeom(
                a=a, b=b, rank=1 + max_depth - depths[ci],
                beta_a=beta, beta_b=beta, height=height, factors=factors,
            )
        )
        level_of[ci] = level
    val, err, neval = iterated_integral(
        geoms, n_base=opts.n_base, n_max=opts.n_max, rel_tol=opts.rel_tol
    )
    lhs = val.real
    log_rhs = (2 * n_pairs - 2) * math.lgamma(1.0 / 3.0) - (n_pairs - 1) * math.lgamma(2.0 / 3.0)
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            log_rhs += (-1.0 / 3.0) * math.log(x[j] - x[i])
    return lhs, math.exp(log_rhs)
