"""Contour quadrature for products of power-law factors.

Two engines are kept deliberately independent so results can be cross-checked:

* a fixed-order Gauss-Jacobi engine on parametrized contours (endpoint powers
  folded into the weight), with the argument of every branched factor tracked
  continuously along the path; nested contours are lifted into the upper half
  plane on sine bumps so paths never intersect;
* an adaptive Gauss-Kronrod engine on substituted variables that removes the
  endpoint singularities algebraically.

Pochhammer double loops are evaluated through their exact finite-radius
decomposition into two endpoint circles plus an offset run; the decomposition
is radius-independent, which the tests exercise.

Branch convention: principal logarithm with arg in [-pi, pi).  A point on a
contour carries an infinitesimal imaginary "ghost" offset whose sign and
magnitude are ordered by a signed integer rank (real branch points have rank
0, contours rank >= 1, higher rank = higher path), so the argument of a
negative real base is always well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


class QuadratureError(ArithmeticError):
    pass


class BranchTrackingError(QuadratureError):
    """Adjacent quadrature nodes differ by too large a phase step."""


@lru_cache(maxsize=512)
def gauss_jacobi_01(n: int, power_left: float, power_right: float):
    """Nodes/weights on [0,1] for integrals of t**pl * (1-t)**pr * g(t).

    scipy weights (1-x)**alpha (1+x)**beta on [-1,1]; the affine map to [0,1]
    contributes 2**-(pl+pr+1).
    """
    x, w = roots_jacobi(n, power_right, power_left)
    t = 0.5 * (x + 1.0)
    return t, w * 2.0 ** -(power_left + power_right + 1.0)


@lru_cache(maxsize=128)
def gauss_legendre_01(n: int):
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


# G7-K15 pair on [-1, 1] (QUADPACK dqk15 coefficients).
_XGK = np.array([
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0,
])
_WGK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469,
])
_GK_X = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
_GK_W = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
_G_W = np.concatenate([_WG[:-1], [_WG[-1]], _WG[-2::-1]])
_G_IDX = np.arange(1, 15, 2)


def _gk15(f, a: float, b: float):
    half, mid = 0.5 * (b - a), 0.5 * (a + b)
    fv = np.asarray(f(mid + half * _GK_X))
    k15 = half * np.sum(_GK_W * fv)
    g7 = half * np.sum(_G_W * fv[_G_IDX])
    return k15, abs(k15 - g7)


def adaptive_gk(f, a: float, b: float, rel_tol=1e-10, abs_tol=1e-14, max_intervals=4000):
    """Adaptive G7-K15 for a (possibly complex) vectorized callable on [a, b]."""
    val, err = _gk15(f, a, b)
    intervals = [(err, a, b, val)]
    neval = 15
    while True:
        total = sum(item[3] for item in intervals)
        total_err = sum(item[0] for item in intervals)
        if total_err <= max(abs_tol, rel_tol * abs(total)):
            return total, total_err, neval
        if len(intervals) >= max_intervals:
            raise QuadratureError(
                f"adaptive quadrature stalled at {len(intervals)} intervals "
                f"(err={total_err:.2e}, value={abs(total):.6e})"
            )
        intervals.sort(key=lambda item: item[0])
        _, lo, hi, _ = intervals.pop()
        mid = 0.5 * (lo + hi)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        neval += 30
        intervals.append((e1, lo, mid, v1))
        intervals.append((e2, mid, hi, v2))


def line_integral_endpoint_powers(
    g, a: float, b: float, beta_a: float, beta_b: float, rel_tol=1e-11,
):
    """Oracle engine: integral over (a,b) of (u-a)**beta_a (b-u)**beta_b g(u).

    The substitution t = s**(1/(1+beta)) removes each endpoint singularity
    exactly (needs beta > -1); the interior is handled adaptively, so sharp
    layers from nearby external branch points converge without tuning.
    Independent of the Gauss-Jacobi engine.
    """
    if beta_a <= -1 or beta_b <= -1:
        raise QuadratureError("endpoint powers must exceed -1 for the line form")
    span = b - a
    pa, pb = 1.0 / (1.0 + beta_a), 1.0 / (1.0 + beta_b)

    def left(s):
        t = np.asarray(s) ** pa
        u = a + 0.5 * span * t
        w = pa * (0.5 * span) ** (1.0 + beta_a) * (b - u) ** beta_b
        return w * g(u)

    def right(s):
        t = np.asarray(s) ** pb
        u = b - 0.5 * span * t
        w = pb * (0.5 * span) ** (1.0 + beta_b) * (u - a) ** beta_a
        return w * g(u)

    v1, e1, n1 = adaptive_gk(left, 0.0, 1.0, rel_tol=rel_tol)
    v2, e2, n2 = adaptive_gk(right, 0.0, 1.0, rel_tol=rel_tol)
    return v1 + v2, e1 + e2, n1 + n2


# ---------------------------------------------------------------------------
# branch-tracked iterated contour integrals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Factor:
    """(u - z)**power for orient=+1, (z - u)**power for orient=-1.

    kind 'point': z is a fixed branch point with ghost rank z_rank.
    kind 'pair': z is the variable of an earlier evaluation level ``other``.
    """

    power: float
    orient: int
    kind: str = "point"
    z: complex = 0.0
    z_rank: int = 0
    other: int = -1


@dataclass
class ContourGeom:
    """One integration contour entwining the branch points a < b."""

    a: float
    b: float
    rank: int
    beta_a: float
    beta_b: float
    height: float = 0.0
    kind: str = "chord"        # 'chord' (simple bent) or 'pochhammer'
    eps: float = 0.0           # circle radius for pochhammer pieces
    factors: list = field(default_factory=list)


def ghost_arg(z: complex, rank_delta: int) -> float:
    """Principal argument with infinitesimal-height tie-breaking on the cut."""
    if z.imag != 0.0:
        return math.atan2(z.imag, z.real)
    if z.real > 0.0:
        return 0.0
    if z.real == 0.0:
        raise QuadratureError("zero base in branched factor")
    return math.pi if rank_delta > 0 else -math.pi


def _march(exprs: np.ndarray, start_expr: complex, start_arg: float) -> np.ndarray:
    """Continuous args along ordered nodes, anchored at a point off the rule."""
    raw = np.angle(np.concatenate([[start_expr], exprs]))
    un = np.unwrap(raw)
    if un.size > 1 and np.max(np.abs(np.diff(un))) > 2.8:
        raise BranchTrackingError("phase step between nodes exceeds safe bound")
    return un[1:] + (start_arg - un[0])


class _Piece:
    """A parametrized path piece: nodes, complex measure, anchor point.

    Endpoint powers are folded into the Jacobi weight on 'chord' pieces and
    appear as explicit factor logs on circle/segment pieces (where the path
    keeps a finite distance eps from the endpoints).
    """

    def __init__(self, geom: ContourGeom, which: str, n: int, coefficient: complex):
        self.geom = geom
        self.which = which
        self.coefficient = coefficient
        g = geom
        span = g.b - g.a
        if which == "chord":
            t, w = gauss_jacobi_01(n, g.beta_a, g.beta_b)
            bump = g.height * np.sin(np.pi * t)
            self.z = g.a + span * t + 1j * bump
            dz = span + 1j * np.pi * g.height * np.cos(np.pi * t)
            phi_l = span + 1j * g.height * np.sin(np.pi * t) / t
            phi_r = span - 1j * g.height * np.sin(np.pi * t) / (1.0 - t)
            extra = g.beta_a * np.log(phi_l) + g.beta_b * np.log(phi_r)
            self.wdz = w * dz * np.exp(extra)
            self.start = complex(g.a)
            self.start_rank = g.rank
            self.own_logs = 0.0
        elif which == "segment":
            levels = max(6, int(math.ceil(math.log2(max(span / g.eps, 2.0)))) + 2)
            t, w = _segment_rule(n, levels)
            lo, hi = g.a + g.eps, g.b - g.eps
            run = hi - lo
            bump = g.height * np.sin(np.pi * t)
            self.z = lo + run * t + 1j * bump
            self.wdz = w * (run + 1j * np.pi * g.height * np.cos(np.pi * t))
            self.start = complex(lo)
            self.start_rank = g.rank
            self.own_logs = self._explicit_endpoint_logs(g)
        elif which in ("circle_a", "circle_b"):
            n_c = max(48, n + n % 2)               # even: no node at phi = pi
            t, w = gauss_legendre_01(n_c)
            if which == "circle_a":
                center, phi0, own_beta = g.a, 0.0, g.beta_a
                self.start_rank = g.rank           # start just above a + eps
            else:
                center, phi0, own_beta = g.b, math.pi, g.beta_b
                self.start_rank = -g.rank          # start just below b - eps
            phi = phi0 + 2.0 * math.pi * t
            self.z = center + g.eps * np.exp(1j * phi)
            dz = 2j * math.pi * g.eps * np.exp(1j * phi)
            # own factor (u-a)**beta_a resp. (b-u)**beta_b: |.| = eps and the
            # argument is the swept angle, exactly zero at the start point
            self.wdz = w * dz * np.exp(own_beta * (math.log(g.eps) + 1j * (phi - phi0)))
            self.start = center + g.eps * math.cos(phi0)
            self.own_logs = self._circle_other_logs(g, which)
        else:
            raise ValueError(which)

    def _explicit_endpoint_logs(self, g: ContourGeom):
        logs = np.zeros(len(self.z), dtype=complex)
        for pt, beta, orient in ((g.a, g.beta_a, +1), (g.b, g.beta_b, -1)):
            expr = orient * (self.z - pt)
            s = orient * (self.start - pt)
            args = _march(expr, s, ghost_arg(complex(s), orient * self.start_rank))
            logs = logs + beta * (np.log(np.abs(expr)) + 1j * args)
        return logs

    def _circle_other_logs(self, g: ContourGeom, which: str):
        if which == "circle_a":
            pt, beta, orient = g.b, g.beta_b, -1   # (b - u)
        else:
            pt, beta, orient = g.a, g.beta_a, +1   # (u - a)
        expr = orient * (self.z - pt)
        s = orient * (self.start - pt)
        args = _march(expr, s, ghost_arg(complex(s), orient * self.start_rank))
        return beta * (np.log(np.abs(expr)) + 1j * args)


@lru_cache(maxsize=256)
def _segment_rule(n: int, levels: int):
    """Composite Legendre rule on [0,1], panels graded geometrically toward
    both endpoints (Pochhammer run integrands peak like d**beta, beta <= -1,
    at distance eps beyond each end).  Per-panel order must keep growing with
    n so that escalation always compares genuinely different rules.
    """
    edges = [0.0]
    edges.extend(0.5 ** (levels - i + 1) for i in range(levels))
    edges.extend(1.0 - 0.5 ** (i + 2) for i in reversed(range(levels)))
    edges.append(1.0)
    per_panel = max(14, n // 8)
    x, w = gauss_legendre_01(per_panel)
    ts, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        ts.append(lo + (hi - lo) * x)
        ws.append((hi - lo) * w)
    return np.concatenate(ts), np.concatenate(ws)


class IteratedContourIntegral:
    """Iterated integral over contours listed in evaluation order (outermost
    first).  Pair factors are attached to the later of their two levels and
    anchored two-dimensionally at the pair of left endpoints."""

    def __init__(self, contours: list[ContourGeom]):
        self.contours = contours
        for lv, c in enumerate(contours):
            for f in c.factors:
                if f.kind == "pair" and not 0 <= f.other < lv:
                    raise ValueError("pair factor must reference an earlier level")
        self.n_evaluations = 0

    def value(self, n: int) -> complex:
        self.n_evaluations = 0
        return self._level(0, [], {}, n)

    def _pieces(self, lv: int, n: int) -> list[_Piece]:
        g = self.contours[lv]
        if g.kind == "chord":
            return [_Piece(g, "chord", n, 1.0)]
        if g.eps <= 0:
            raise ValueError("pochhammer contour needs a positive circle radius")
        coeff_a = np.exp(-2j * math.pi * g.beta_b) - 1.0
        coeff_b = -np.exp(2j * math.pi * (g.beta_a - g.beta_b)) * (
            np.exp(-2j * math.pi * g.beta_a) - 1.0
        )
        coeff_line = (
            4.0
            * np.exp(1j * math.pi * (g.beta_a - g.beta_b))
            * math.sin(math.pi * g.beta_a)
            * math.sin(math.pi * g.beta_b)
        )
        return [
            _Piece(g, "circle_a", n, coeff_a),
            _Piece(g, "circle_b", n, coeff_b),
            _Piece(g, "segment", n, coeff_line),
        ]

    def _level(self, lv: int, fixed: list, pair_anchor: dict, n: int) -> complex:
        g = self.contours[lv]
        total = 0.0 + 0.0j
        last = lv == len(self.contours) - 1
        for piece in self._pieces(lv, n):
            z = piece.z
            logI = np.zeros(len(z), dtype=complex) + piece.own_logs
            for f in g.factors:
                if f.kind == "point":
                    expr = f.orient * (z - f.z)
                    s = f.orient * (piece.start - f.z)
                    base = ghost_arg(complex(s), f.orient * (piece.start_rank - f.z_rank))
                else:
                    w, w_rank = fixed[f.other]
                    expr = f.orient * (z - w)
                    s = f.orient * (piece.start - w)
                    ref = complex(g.a)
                    r = f.orient * (ref - w)
                    d_s = f.orient * (piece.start_rank - w_rank)
                    d_r = f.orient * (g.rank - w_rank)
                    base = pair_anchor[id(f)] + (
                        ghost_arg(complex(s), d_s) - ghost_arg(complex(r), d_r)
                    )
                args = _march(expr, complex(s), base)
                logI += f.power * (np.log(np.abs(expr)) + 1j * args)

            if last:
                total += piece.coefficient * np.sum(piece.wdz * np.exp(logI))
                self.n_evaluations += len(z)
                continue

            # continuous anchors, along this piece, for pair factors that live
            # on deeper levels and reference this one
            anchor_tracks = {}
            for d in range(lv + 1, len(self.contours)):
                for f in self.contours[d].factors:
                    if f.kind != "pair" or f.other != lv:
                        continue
                    ref = complex(self.contours[d].a)
                    ref_rank = self.contours[d].rank
                    expr = f.orient * (ref - z)
                    s = f.orient * (ref - piece.start)
                    base = ghost_arg(complex(s), f.orient * (ref_rank - piece.start_rank))
                    anchor_tracks[id(f)] = _march(expr, complex(s), base)
            inner = np.empty(len(z), dtype=complex)
            for k in range(len(z)):
                sub = dict(pair_anchor)
                for key, track in anchor_tracks.items():
                    sub[key] = track[k]
                inner[k] = self._level(
                    lv + 1, fixed + [(complex(z[k]), piece.start_rank)], sub, n
                )
            total += piece.coefficient * np.sum(piece.wdz * np.exp(logI) * inner)
            self.n_evaluations += len(z)
        return total


def iterated_integral(
    contours: list[ContourGeom],
    n_base: int = 80,
    n_max: int = 4000,
    rel_tol: float = 1e-9,
):
    """Evaluate with node-count escalation; returns (value, err_est, n_evals)."""
    if not contours:
        return 1.0 + 0.0j, 0.0, 0
    engine = IteratedContourIntegral(contours)
    evals = 0
    n = n_base
    prev = None
    prev_err = None
    while True:
        try:
            cur = engine.value(n)
            evals += engine.n_evaluations
        except BranchTrackingError:
            if n > n_max:
                raise
            cur = None
        if cur is not None and prev is not None:
            err = abs(cur - prev)
            scale = max(abs(cur), 1e-300)
            if err <= rel_tol * scale:
                return cur, err, evals
            # rule-construction noise floor: successive refinements stop
            # improving while already far below any meaningful tolerance
            if prev_err is not None and err >= 0.5 * prev_err and err <= 1e-8 * scale:
                return cur, err, evals
            if n > n_max:
                if err > 100 * rel_tol * scale:
                    raise QuadratureError(
                        f"contour quadrature did not converge: n={n}, "
                        f"rel err={err / scale:.2e}"
                    )
                return cur, err, evals
            prev_err = err
        elif n > n_max:
            raise QuadratureError("contour quadrature did not converge")
        if cur is not None:
            prev = cur
        n = int(n * 1.6) + 1
