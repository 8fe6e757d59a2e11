"""Numerical realization of the collapse limit functionals, the diagram-indexed
functional vector, Frobenius-series extraction, and the interval-collapse
prefactor predictors.

Every limit here multiplies by the interval gap to the power 6/kappa - 1 and
extrapolates on a geometric grid; the extrapolation exploits the known
exponent ladder of the collapse expansion (gap powers 8/kappa - 1,
8/kappa, 2, ...), which is far more accurate than a naive limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import gamma as _gamma

from . import cft
from .diagrams import ArcDiagram, adjacent_arcs, collapse_arc, enumerate_diagrams


class LimitError(ArithmeticError):
    pass


class PredictorConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class LimitResult:
    value: float
    error: float


@dataclass(frozen=True)
class LimitSpec:
    kind: str                 # 'collapse' or 'send_to_infinity'
    index: int | None
    power: float              # 6/kappa - 1


def limit_spec(kind: str, kappa, index: int | None = None) -> LimitSpec:
    k = cft._kap(kappa)
    return LimitSpec(kind=kind, index=index, power=6.0 / k - 1.0)


def _richardson(values: np.ndarray, exponents: list[float]) -> LimitResult:
    """Generalized Richardson on a halving grid, eliminating the exponents in
    order.  values[k] corresponds to eps0 * 2**-k."""
    t = np.asarray(values, dtype=float)
    prev_last = t[-1]
    for e in exponents:
        if len(t) < 2:
            break
        r = 2.0**-e
        t = (t[1:] - r * t[:-1]) / (1.0 - r)
    err = abs(t[-1] - t[-2]) if len(t) >= 2 else abs(t[-1] - prev_last)
    return LimitResult(float(t[-1]), float(err))


def _collapse_room(base: tuple[float, ...], i: int) -> float:
    """Available gap for x_{i+1} above x_i after the collapse starts."""
    if i + 1 < len(base):
        return base[i + 1] - base[i - 1]
    return base[i - 1] - base[0] if len(base) > 2 else 1.0


def limit_collapse(
    f, i: int, kappa, base_config, eps0: float | None = None, levels: int = 6,
    abs_floor: float = 3e-5,
) -> LimitResult:
    """lim (x_{i+1}-x_i)**(6/kappa-1) f(x) as x_{i+1} -> x_i (1-based i).

    f maps an ordered point tuple to a float; all points except x_{i+1} stay
    at their base positions.  ``abs_floor`` is the absolute scale below which
    a noisy-but-tiny extrapolation counts as a settled zero.
    """
    k = cft._kap(kappa)
    base = tuple(float(v) for v in base_config)
    if not 1 <= i < len(base):
        raise ValueError(f"collapse index {i} out of range")
    room = _collapse_room(base, i)
    e0 = eps0 if eps0 is not None else 1e-2 * room
    p = 6.0 / k - 1.0
    g = 8.0 / k - 1.0
    ys = []
    for lv in range(levels):
        eps = e0 * 2.0**-lv
        cfg = base[:i] + (base[i - 1] + eps,) + base[i + 1:]
        ys.append(eps**p * f(cfg))
    ladder = sorted({g, g + 1.0, 2.0})
    res = _richardson(np.array(ys), ladder[:3])
    spread = max(ys) - min(ys)
    unsettled = res.error > 0.25 * (abs(res.value) + spread)
    if unsettled and res.error > abs_floor:
        raise LimitError(
            f"collapse extrapolation did not settle (value={res.value:.3e}, "
            f"error={res.error:.3e})"
        )
    return res


def limit_to_infinity(
    f, kappa, inner_points, t0: float | None = None, levels: int = 6,
) -> LimitResult:
    """lim (2t)**(6/kappa-1) f(-t, inner..., t) as t grows."""
    k = cft._kap(kappa)
    inner = tuple(float(v) for v in inner_points)
    scale = max((abs(v) for v in inner), default=1.0)
    t_start = t0 if t0 is not None else 40.0 * max(scale, 1.0)
    p = 6.0 / k - 1.0
    g = 8.0 / k - 1.0
    ys = []
    for lv in range(levels):
        t = t_start * 2.0**lv
        ys.append((2.0 * t) ** p * f((-t,) + inner + (t,)))
    ladder = sorted({g, 1.0, g + 1.0, 2.0})
    return _richardson(np.array(ys), ladder[:3])


def _insert_pair(reduced: tuple[float, ...], slot: int, frac: float = 0.4):
    """Place a degenerate pair into the gap at 1-based slot ``slot``."""
    y = list(reduced)
    gaps = [b - a for a, b in zip(y, y[1:])] or [1.0]
    pad = max(np.median(gaps), 1e-3)
    if slot == 1:
        left = y[0] - pad
    elif slot == len(y) + 1:
        left = y[-1] + pad
    else:
        lo, hi = y[slot - 2], y[slot - 1]
        left = lo + frac * (hi - lo)
    return left


def apply_functional(
    diagram: ArcDiagram, f, kappa, base_config, first_arc: int | None = None,
) -> LimitResult:
    """Apply the diagram's sequence of collapse limits to f.

    At each step an arc on adjacent surviving points is collapsed (innermost
    first by default; ``first_arc`` overrides the first choice, which any
    allowable order must leave invariant).  The collapsed pair is re-inserted
    at a dynamic position when deeper limits probe the reduced function,
    exploiting the independence of the limit from the surviving position.
    """
    base = tuple(float(v) for v in base_config)
    if len(base) != 2 * diagram.n_pairs:
        raise ValueError("configuration size does not match the diagram")
    i = first_arc if first_arc is not None else min(adjacent_arcs(diagram))
    if diagram.partner(i) != i + 1:
        raise ValueError(f"points {i}, {i+1} are not an arc of the diagram")
    if diagram.n_pairs == 1:
        return limit_collapse(f, 1, kappa, base)
    errs: list[float] = []

    def g(reduced):
        left = _insert_pair(reduced, i)
        full = reduced[: i - 1] + (left, left) + reduced[i - 1:]
        res = limit_collapse(f, i, kappa, full)
        errs.append(res.error)
        return res.value

    reduced_base = base[: i - 1] + base[i + 1:]
    outer = apply_functional(collapse_arc(diagram, i), g, kappa, reduced_base)
    inner_err = max(errs) if errs else 0.0
    return LimitResult(outer.value, outer.error + inner_err)


@dataclass(frozen=True)
class FunctionalComponent:
    index: int                 # 1-based diagram index
    value: float | None
    error: float | None
    failure: str | None = None


def v_map(f, kappa, base_config, n_pairs: int) -> list[FunctionalComponent]:
    """All catalan(N) collapse functionals applied to f; failures are flagged
    per component instead of aborting the vector."""
    out = []
    for idx, d in enumerate(enumerate_diagrams(n_pairs), start=1):
        try:
            res = apply_functional(d, f, kappa, base_config)
            out.append(FunctionalComponent(idx, res.value, res.error))
        except (LimitError, ArithmeticError) as exc:
            out.append(FunctionalComponent(idx, None, None, failure=str(exc)))
    return out


def v_vector(f, kappa, base_config, n_pairs: int) -> np.ndarray:
    comps = v_map(f, kappa, base_config, n_pairs)
    bad = [c for c in comps if c.failure]
    if bad:
        raise LimitError(f"functional components failed: {[c.index for c in bad]}")
    return np.array([c.value for c in comps])


# ---------------------------------------------------------------------------
# Frobenius-series extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrobeniusFit:
    A0: float
    A1: float
    B0: float
    logB0: float | None
    logB0_se: float | None
    fitted_exponents: tuple[float, float]
    residual: float
    condition_number: float


def _design(eps: np.ndarray, exps: list[float], with_log: float | None):
    cols = [eps**e for e in exps]
    if with_log is not None:
        cols.append(eps**with_log * np.log(eps))
    return np.column_stack(cols)


def frobenius_fit(
    f, i: int, kappa, base_config,
    n_eps: int = 24, force_log: bool = False, eps_decade: tuple[float, float] | None = None,
) -> FrobeniusFit:
    """Fit f near the collapse of (x_i, x_{i+1}) to the two-channel expansion.

    Channels: gap**(1-6/kappa) * (A0 + A1*gap + A2*gap**2) and
    gap**(2/kappa) * (B0 + B1*gap), plus gap**(2/kappa) * log(gap) when
    8/kappa is an odd integer (or on request).  Reports coefficient standard
    errors so a log term's significance can be judged.
    """
    k = cft._kap(kappa)
    base = tuple(float(v) for v in base_config)
    p1, p2 = 1.0 - 6.0 / k, 2.0 / k
    room = _collapse_room(base, i)
    log_case = force_log or cft.log_regime(k)
    if eps_decade:
        lo, hi = eps_decade
    elif cft.log_regime(k):
        lo, hi = 1e-3 * room, 3e-2 * room   # wider: the log column separates slowly
    else:
        lo, hi = 1e-3 * room, 1e-2 * room

    with_log = p2 if log_case else None
    raw_exps = [p1, p1 + 1.0, p1 + 2.0, p2, p2 + 1.0]
    if log_case:
        # a forced log column competes with the omitted series tails; include
        # them so a genuinely absent log term comes out insignificant
        raw_exps += [p1 + 3.0, p2 + 2.0]
    exps: list[float] = []
    for e in raw_exps:
        if all(abs(e - q) > 1e-9 for q in exps):
            exps.append(e)

    for attempt in range(2):
        eps = np.geomspace(lo, hi, n_eps)
        ys = np.array([
            f(base[:i] + (base[i - 1] + e,) + base[i + 1:]) for e in eps
        ])
        # relative weighting: each gap scale informs the fit equally, which is
        # what separates the slowly varying log column from its power twin
        wts = 1.0 / np.maximum(np.abs(ys), 1e-300)
        X = _design(eps, exps, with_log) * wts[:, None]
        yw = ys * wts
        norms = np.linalg.norm(X, axis=0)
        cond = np.linalg.cond(X / norms)
        if cond <= 1e8:
            break
        lo, hi = lo * 0.3, hi * 3.0   # widen the decade once, then fail
    else:
        raise LimitError(f"design matrix ill-conditioned (cond={cond:.2e})")

    coef_s, *_ = np.linalg.lstsq(X / norms, yw, rcond=None)
    coef = coef_s / norms
    resid = yw - X @ coef
    dof = max(len(eps) - len(coef), 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv((X / norms).T @ (X / norms))
    ses = np.sqrt(np.diag(cov)) / norms

    i_p1 = exps.index(p1)
    i_a1 = exps.index(p1 + 1.0)
    i_p2 = min(range(len(exps)), key=lambda j: abs(exps[j] - p2))
    logB0 = float(coef[-1]) if with_log is not None else None
    logB0_se = float(ses[-1]) if with_log is not None else None

    # nonlinear exponent recovery: two free powers, amplitudes projected out
    def objective(q):
        q1, q2 = q
        cols = [eps**q1, eps ** (q1 + 1.0), eps ** (q1 + 2.0), eps**q2]
        if abs((q2 - q1) - round(q2 - q1)) > 1e-6:
            cols.append(eps ** (q2 + 1.0))
        if with_log is not None:
            cols.append(eps**q2 * np.log(eps))
        cols = np.column_stack(cols) * wts[:, None]
        cn = np.linalg.norm(cols, axis=0)
        c, res2, *_ = np.linalg.lstsq(cols / cn, yw, rcond=None)
        r = yw - (cols / cn) @ c
        return float(r @ r)

    fit = minimize(objective, x0=[p1, p2], method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-30, "maxiter": 400})
    q1, q2 = float(fit.x[0]), float(fit.x[1])

    return FrobeniusFit(
        A0=float(coef[i_p1]),
        A1=float(coef[i_a1]),
        B0=float(coef[i_p2]),
        logB0=logB0,
        logB0_se=logB0_se,
        fitted_exponents=(q1, q2),
        residual=float(np.sqrt(resid @ resid / len(eps))),
        condition_number=float(cond),
    )


# ---------------------------------------------------------------------------
# interval-collapse prefactor predictors
# ---------------------------------------------------------------------------

def _check(cond: bool, msg: str):
    if not cond:
        raise PredictorConstraintError(msg)


def _base_coefficient(betas, i, x) -> float:
    bi, bj = betas[i - 1], betas[i]
    coeff = _gamma(bi + 1.0) * _gamma(bj + 1.0) / _gamma(bi + bj + 2.0)
    for j, (b, xj) in enumerate(zip(betas, x), start=1):
        if j in (i, i + 1):
            continue
        coeff *= abs(x[i - 1] - xj) ** b
    return coeff


def predict_case2(betas, i: int, x) -> float:
    """Leading coefficient of gap**(b_i+b_{i+1}+1) when the collapsing interval
    carries its own contour."""
    betas = [float(b) for b in betas]
    _check(abs(sum(betas) + 2.0) < 1e-9, "powers must sum to -2")
    _check(abs(betas[i - 1] - betas[i]) < 1e-12, "collapse powers must match")
    return _base_coefficient(betas, i, x)


def predict_case3(betas, i: int, x) -> float:
    """Leading coefficient when one collapse endpoint terminates a contour."""
    betas = [float(b) for b in betas]
    bi, bj = betas[i - 1], betas[i]
    _check(abs(sum(betas) + 2.0) < 1e-9, "powers must sum to -2")
    _check(abs(bi - bj) < 1e-12, "collapse powers must match")
    _check(bi + bj < -1.0, "case 3 requires b_i + b_{i+1} < -1")
    s = bi + bj
    _check(abs(s - round(s)) > 1e-9, "b_i + b_{i+1} must not be an integer")
    for b in betas:
        _check(not (b < 0 and abs(b - round(b)) < 1e-9), "negative integer power")
    ratio = -math.sin(math.pi * bj) / math.sin(math.pi * (bi + bj))
    return ratio * _base_coefficient(betas, i, x)


def predict_case4(betas, gamma_power: float, i: int, x, rel_tol: float = 1e-11) -> float:
    """Leading coefficient of gap**(2 b_i + 1) when the collapse joins two
    contours; includes the reduced joined-contour integral."""
    from .quadrature import line_integral_endpoint_powers

    betas = [float(b) for b in betas]
    bi, bj = betas[i - 1], betas[i]
    _check(abs(sum(betas) + gamma_power + 2.0) < 1e-9, "powers plus gamma must sum to -2")
    _check(abs(bi - bj) < 1e-12, "collapse powers must match")
    _check(abs(bi + gamma_power / 2.0) < 1e-9, "case 4 requires b_i = -gamma/2")
    _check(bi + bj < -1.0, "case 4 requires b_i + b_{i+1} < -1")
    prefactor = -math.sin(math.pi * bj) / math.sin(math.pi * (bi + bj)) * (
        _gamma(bi + 1.0) * _gamma(bj + 1.0) / _gamma(bi + bj + 2.0)
    )
    point_product = 1.0
    for j, (b, xj) in enumerate(zip(betas, x), start=1):
        if j in (i, i + 1):
            continue
        point_product *= abs(x[i - 1] - xj) ** b

    a_red, b_red = x[i - 2], x[i + 2]
    spect = [(betas[j - 1], x[j - 1]) for j in range(1, len(x) + 1)
             if j not in (i - 1, i, i + 1, i + 2)]

    def g(u):
        out = np.ones_like(u)
        for b, xj in spect:
            base = (u - xj) if xj < a_red else (xj - u)
            out = out * base**b
        return out

    joined, _, _ = line_integral_endpoint_powers(
        g, a_red, b_red, betas[i - 2], betas[i + 1], rel_tol=rel_tol
    )
    return prefactor * point_product * joined
