"""Connectivity weights via the meander linear system, crossing probability
formulas, the inserted-interval combination and its diagram decomposition.

The weight vector solves (Gram matrix at n(kappa)) . Pi = F componentwise,
which fails exactly at the exceptional speeds; there a kappa-perturbation with
Richardson extrapolation takes over, following the continuity of the weights
in kappa.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import cft, meander
from .coulomb import DEFAULT_OPTS, QuadratureOptions, evaluate_F
from .diagrams import (
    ArcDiagram,
    catalan,
    chi_map,
    collapse_arc,
    diagram_index,
    enumerate_diagrams,
    insert_arc,
)


class ExceptionalSpeedError(ValueError):
    """The meander matrix is singular at this speed; use the perturbative
    path (connectivity_weights_exceptional)."""


class MixedSignError(ValueError):
    pass


@dataclass(frozen=True)
class WeightVector:
    kappa: float
    x: tuple[float, ...]
    values: np.ndarray
    condition_number: float
    regime: str                      # 'generic' or 'exceptional'
    error_estimate: float = 0.0
    positive: bool = True


def _rhs_values(kappa, x, n_pairs, opts, jobs: int | None = None) -> np.ndarray:
    indices = range(1, catalan(n_pairs) + 1)
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            vals = list(pool.map(lambda th: evaluate_F(th, kappa, x, opts=opts).value, indices))
    else:
        vals = [evaluate_F(th, kappa, x, opts=opts).value for th in indices]
    return np.array(vals)


def connectivity_weights(
    kappa, x, opts: QuadratureOptions = DEFAULT_OPTS, jobs: int | None = None,
) -> WeightVector:
    """Solve the diagram-basis linear system for the weight vector at x."""
    k = cft._kap(kappa)
    x = tuple(float(v) for v in x)
    n = len(x) // 2
    hit = cft.is_exceptional(k, n)
    if hit is not None:
        raise ExceptionalSpeedError(
            f"kappa={k} is the exceptional speed pair q={hit[0]}, q'={hit[1]} "
            f"for N={n}; use connectivity_weights_exceptional"
        )
    m = meander.evaluate(meander.loop_matrix(n), cft.fugacity(k))
    rhs = _rhs_values(k, x, n, opts, jobs)
    lu, piv = scipy.linalg.lu_factor(m)
    sol = scipy.linalg.lu_solve((lu, piv), rhs)
    # one step of iterative refinement; the matrix degenerates continuously
    # toward the exceptional speeds
    sol = sol + scipy.linalg.lu_solve((lu, piv), rhs - m @ sol)
    cond = float(np.linalg.cond(m))
    return _finish(k, x, sol, cond, "generic")


def _finish(k, x, values, cond, regime, err=0.0) -> WeightVector:
    positive = bool(np.all(values > 0))
    if 8.0 / 3.0 < k < 8.0 and not positive:
        warnings.warn(
            f"weight vector has non-positive entries at kappa={k}; positivity "
            "is expected for 8/3 < kappa < 8 but rests on the crossing "
            "probability conjecture",
            stacklevel=3,
        )
    return WeightVector(k, tuple(x), np.asarray(values, dtype=float), cond, regime,
                        error_estimate=err, positive=positive)


def connectivity_weights_exceptional(
    kappa_prime, x, h: float = 0.04,
    opts: QuadratureOptions = DEFAULT_OPTS, jobs: int | None = None,
) -> WeightVector:
    """Weights at an exceptional speed by symmetric kappa-extrapolation.

    Evaluates at kappa' +- h and +- 2h; the symmetric averages S(h) carry an
    h**2 error, removed by one Richardson step.  The reported error estimate
    is the Richardson correction itself; each component is checked against it.
    """
    k = cft._kap(kappa_prime)
    x = tuple(float(v) for v in x)
    n = len(x) // 2
    if cft.is_exceptional(k, n) is None:
        raise ValueError(f"kappa={k} is not exceptional for N={n}")

    def weights_at(kk) -> np.ndarray:
        if cft.is_exceptional(kk, n) is not None:
            raise ValueError(f"perturbed speed {kk} is itself exceptional; change h")
        return connectivity_weights(kk, x, opts=opts, jobs=jobs).values

    s1 = 0.5 * (weights_at(k + h) + weights_at(k - h))
    s2 = 0.5 * (weights_at(k + 2 * h) + weights_at(k - 2 * h))
    extrap = (4.0 * s1 - s2) / 3.0
    correction = np.abs(s1 - s2) / 3.0
    worst = int(np.argmax(correction))
    if correction[worst] > 0.5 * max(1.0, abs(extrap[worst])):
        raise ArithmeticError(
            f"kappa-extrapolation diverges in component {worst + 1}: "
            f"correction {correction[worst]:.3e} vs value {extrap[worst]:.3e}"
        )
    return _finish(k, x, extrap, math.inf, "exceptional", err=float(np.max(correction)))


def crossing_probabilities(coeffs, kappa, x, weight_vector: WeightVector | None = None,
                           opts: QuadratureOptions = DEFAULT_OPTS) -> np.ndarray:
    """P = a .* Pi / sum(a .* Pi); the nonzero coefficients must share a sign."""
    a = np.asarray(coeffs, dtype=float)
    nz = a[a != 0]
    if nz.size == 0:
        raise MixedSignError("all coefficients vanish")
    if np.any(nz > 0) and np.any(nz < 0):
        raise MixedSignError("nonzero coefficients must share a sign")
    w = weight_vector if weight_vector is not None else connectivity_weights(kappa, x, opts=opts)
    if len(a) != len(w.values):
        raise ValueError(f"need {len(w.values)} coefficients, got {len(a)}")
    weighted = a * w.values
    denom = weighted.sum()
    if denom == 0:
        raise ZeroDivisionError("zero total weight in the probability denominator")
    return weighted / denom


def theta(sigma: int, i: int, kappa, x, opts: QuadratureOptions = DEFAULT_OPTS) -> float:
    """The inserted-interval combination Theta_sigma at the full configuration.

    sigma indexes (1-based) the size N-1 diagram enumeration; the inserted
    pair occupies slots i, i+1 of x.  Built as sum_j binv[sigma, j] *
    F(diagram_j with an arc inserted at i), binv the inverse Gram matrix at
    size N-1.
    """
    k = cft._kap(kappa)
    x = tuple(float(v) for v in x)
    n = len(x) // 2
    if n < 2:
        raise ValueError("theta needs at least two pairs")
    if cft.is_exceptional(k, n - 1) is not None:
        raise ExceptionalSpeedError(
            f"size {n - 1} meander matrix is singular at kappa={k}"
        )
    small = enumerate_diagrams(n - 1)
    if not 1 <= sigma <= len(small):
        raise ValueError(f"sigma must be in 1..{len(small)}")
    m = meander.evaluate(meander.loop_matrix(n - 1), cft.fugacity(k))
    e = np.zeros(len(small))
    e[sigma - 1] = 1.0
    b_row = np.linalg.solve(m, e)  # symmetric, row sigma of the inverse
    total = 0.0
    for j, g in enumerate(small):
        if b_row[j] == 0.0:
            continue
        big = insert_arc(g, i)
        total += b_row[j] * evaluate_F(big, k, x, opts=opts).value
    return total


@dataclass(frozen=True)
class ThetaDecompositionReport:
    sigma: int
    i: int
    kappa: float
    lhs_components: np.ndarray      # numeric v(Theta_sigma)
    rhs_components: np.ndarray      # n at the matched class, 1 on the chi fiber
    max_discrepancy: float
    fiber: tuple[int, ...]          # 1-based indices rho with chi(rho) = sigma*
    failures: tuple[str, ...]


def verify_theta_decomposition(
    sigma: int, i: int, kappa, x, opts: QuadratureOptions = DEFAULT_OPTS,
) -> ThetaDecompositionReport:
    """Check the diagram decomposition of Theta_sigma through the collapse
    functionals: v(Theta) must equal n at the class carrying the inserted arc
    and 1 exactly on its cut-map fiber."""
    from .asymptotics import v_map

    k = cft._kap(kappa)
    x = tuple(float(v) for v in x)
    n = len(x) // 2
    small = enumerate_diagrams(n - 1)
    target = insert_arc(small[sigma - 1], i)      # diagram of Pi_sigma*
    target_idx = diagram_index(target)
    fiber = []
    for idx, d in enumerate(enumerate_diagrams(n), start=1):
        if d.has_arc(i, i + 1):
            continue
        image = chi_map(d, i)
        if collapse_arc(image, i) == small[sigma - 1]:
            fiber.append(idx)
    rhs = np.zeros(catalan(n))
    rhs[target_idx - 1] = cft.fugacity(k)
    for idx in fiber:
        rhs[idx - 1] += 1.0

    f = lambda xs: theta(sigma, i, k, xs, opts=opts)
    comps = v_map(f, k, x, n)
    lhs = np.array([c.value if c.value is not None else np.nan for c in comps])
    failures = tuple(f"component {c.index}: {c.failure}" for c in comps if c.failure)
    disc = float(np.nanmax(np.abs(lhs - rhs))) if not np.all(np.isnan(lhs)) else math.inf
    return ThetaDecompositionReport(
        sigma=sigma, i=i, kappa=k, lhs_components=lhs, rhs_components=rhs,
        max_discrepancy=disc, fiber=tuple(fiber), failures=failures,
    )


def chi_fiber_total(n_pairs: int, i: int) -> int:
    """Number of size-N classes without the arc (i, i+1); the cut map sends
    exactly these onto the classes that carry it."""
    return catalan(n_pairs) - catalan(n_pairs - 1)
