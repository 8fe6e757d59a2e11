"""Scalar kappa-dependent quantities: fugacity, central charge, Kac weights,
Coulomb gas charges, indicial exponents, exceptional speeds, and the
normalization prefactor of the contour-integral basis.

All formulas are continuous across the dense/dilute transition at kappa = 4;
kappa = 4 itself is assigned to the dilute branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath

KAPPA_MIN, KAPPA_MAX = 0.0, 8.0

#: 8/kappa closer than this to an integer switches prefactor evaluation to
#: high-precision / series-limit mode (raw gamma/sin evaluation loses digits).
SINGULAR_TOL = 1e-9


class SpeedRangeError(ValueError):
    pass


class PrefactorOverflowError(ArithmeticError):
    """The prefactor limit is infinite (possible only with Pochhammer
    normalization at kappa = 4/r); evaluation must use the closed form or a
    kappa perturbation instead."""


@dataclass(frozen=True)
class Speed:
    """An SLE speed restricted to the open interval (0, 8)."""

    kappa: float

    def __post_init__(self):
        if not (KAPPA_MIN < self.kappa < KAPPA_MAX):
            raise SpeedRangeError(f"kappa must lie in (0, 8), got {self.kappa}")

    def __float__(self) -> float:
        return float(self.kappa)


def _kap(kappa) -> float:
    k = float(kappa.kappa) if isinstance(kappa, Speed) else float(kappa)
    if not (KAPPA_MIN < k < KAPPA_MAX):
        raise SpeedRangeError(f"kappa must lie in (0, 8), got {k}")
    return k


def fugacity(kappa) -> float:
    """O(n)-model loop fugacity n(kappa) = -2 cos(4 pi / kappa)."""
    k = _kap(kappa)
    return -2.0 * math.cos(4.0 * math.pi / k)


def central_charge(kappa) -> float:
    k = _kap(kappa)
    return (6.0 - k) * (3.0 * k - 8.0) / (2.0 * k)


def is_dense(kappa) -> bool:
    """Dense phase is kappa > 4 strictly; kappa = 4 counts as dilute."""
    return _kap(kappa) > 4.0


def kac_weight(r: int, s: int, kappa) -> float:
    """Conformal weight h_{r,s}(kappa) of the (r, s) Kac operator."""
    k = _kap(kappa)
    if r < 1 or s < 1:
        raise ValueError(f"Kac indices must be positive, got ({r}, {s})")
    if is_dense(k):
        num = (k * r - 4.0 * s) ** 2 - (k - 4.0) ** 2
    else:
        num = (k * s - 4.0 * r) ** 2 - (k - 4.0) ** 2
    return num / (16.0 * k)


@dataclass(frozen=True)
class ChargeSet:
    alpha0: float
    alpha_plus: float
    alpha_minus: float
    phase: str  # 'dense' or 'dilute'


def charges(kappa) -> ChargeSet:
    """Background charge and the two screening charges.

    Satisfies alpha_plus + alpha_minus = 2*alpha0 and
    alpha_plus * alpha_minus = -1 in both phases.
    """
    k = _kap(kappa)
    rk = math.sqrt(k)
    if is_dense(k):
        return ChargeSet(0.5 * (rk / 2 - 2 / rk), rk / 2, -2 / rk, "dense")
    return ChargeSet(0.5 * (2 / rk - rk / 2), 2 / rk, -rk / 2, "dilute")


def kac_charge(r: int, s: int, sign: int, kappa) -> float:
    """Kac charge alpha_{r,s}^(sign), sign in {+1, -1}."""
    k = _kap(kappa)
    if r < 1 or s < 1:
        raise ValueError(f"Kac indices must be positive, got ({r}, {s})")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if is_dense(k):
        core = k - 4.0 + sign * abs(r * k - 4.0 * s)
    else:
        core = 4.0 - k + sign * abs(s * k - 4.0 * r)
    return core / (4.0 * math.sqrt(k))


@dataclass(frozen=True)
class ExponentPair:
    """The two indicial powers of the collapse expansion of any solution."""

    identity_power: float
    two_leg_power: float


def exponent_pair(kappa) -> ExponentPair:
    k = _kap(kappa)
    return ExponentPair(identity_power=1.0 - 6.0 / k, two_leg_power=2.0 / k)


def log_regime(kappa, tol: float = SINGULAR_TOL) -> bool:
    """True when 8/kappa is an odd positive integer (logarithmic collapse channel)."""
    k = _kap(kappa)
    r = 8.0 / k
    return abs(r - round(r)) <= tol and round(r) % 2 == 1 and round(r) >= 1


def exceptional_speed(q: int, q_prime: int) -> Speed:
    """kappa_{q,q'} = 4q/q' for coprime positive integers with q > 1."""
    if q <= 1 or q_prime < 1:
        raise ValueError(f"need q > 1 and q' >= 1, got ({q}, {q_prime})")
    if math.gcd(q, q_prime) != 1:
        raise ValueError(f"({q}, {q_prime}) are not coprime")
    return Speed(4.0 * q / q_prime)


def det_zero(q: int, q_prime: int) -> float:
    """Meander determinant zero n_{q,q'} = -2 cos(pi q'/q), 1 <= q' < q."""
    if not 1 <= q_prime < q:
        raise ValueError(f"need 1 <= q' < q, got ({q}, {q_prime})")
    return -2.0 * math.cos(math.pi * q_prime / q)


def is_exceptional(kappa, n_pairs: int, tol: float = 1e-12):
    """Coprime (q, q') with q <= N+1 whose determinant zero matches n(kappa).

    Returns None when the fugacity matches no such zero, i.e. when the meander
    matrix of size N is invertible at this speed.  All speeds with
    n = n_{q,q'} are of the form kappa_{q,q'} or kappa_{q,2mq+-q'}, so matching
    the fugacity directly covers every such family.
    """
    n = fugacity(kappa)
    for q in range(2, n_pairs + 2):
        for qp in range(1, q):
            if math.gcd(q, qp) == 1 and abs(n - det_zero(q, qp)) <= tol:
                return (q, qp)
    return None


def _near_integer(x: float, tol: float) -> int | None:
    r = round(x)
    return r if abs(x - r) <= tol else None


def basis_prefactor(kappa, n_pairs: int, simple_replacements: int) -> float:
    """Normalization of the contour-integral basis elements.

    Equals n * [n*G(2-8/k) / (4 sin^2(4pi/k) G(1-4/k)^2)]^(N-1), with one
    factor of 4 sin^2(4pi/k) restored per contour replaced by a simple curve.
    Evaluated as n * [g1 / (4 g2^2)]^(N-1) * (4 sin^2)^s with
    g1 = n*Gamma(2-8/k) and g2 = sin(4pi/k)*Gamma(1-4/k); both g1 (at odd
    8/k) and g2 (at integer 4/k) have removable singularities, handled by
    series limits and high-precision evaluation.
    """
    k = _kap(kappa)
    n_rep = simple_replacements
    if not 0 <= n_rep <= n_pairs - 1:
        raise ValueError(
            f"simple_replacements must lie in [0, {n_pairs - 1}], got {n_rep}"
        )
    if n_pairs == 1:
        return fugacity(k)

    m = n_pairs - 1
    r8 = _near_integer(8.0 / k, SINGULAR_TOL)
    if r8 is not None and r8 % 2 == 0 and r8 >= 2:
        # kappa ~= 4/r: g1 has a genuine simple pole, sin^(2s) a zero of order
        # 2s; the net order of the prefactor is 2s - (N-1).
        r = r8 // 2
        net = 2 * n_rep - m
        if abs(8.0 / k - r8) <= 1e-13:
            if net > 0:
                return 0.0
            if net < 0:
                raise PrefactorOverflowError(
                    f"prefactor diverges at kappa = 4/{r} with "
                    f"{n_rep} replacements and N = {n_pairs}"
                )
            nk = -2.0 * (-1.0) ** r  # n(4/r) = -2 cos(pi r)
            g1_res = nk * 2.0 / (r * r * math.factorial(2 * r - 2))
            sin2_curv = math.pi**2 * r**4 / 16.0
            g2_lim = math.pi / math.factorial(r - 1)
            return (
                nk
                * 4.0 ** (n_rep - m)
                * g1_res**m
                * sin2_curv**n_rep
                / g2_lim ** (2 * m)
            )
        # near but not at the pole: fall through to high precision

    near_singular = (
        r8 is not None
        or _near_integer(4.0 / k, SINGULAR_TOL) is not None
    )
    with mpmath.workdps(50 if near_singular else 25):
        kk = mpmath.mpf(k)
        four_pi_over_k = 4 * mpmath.pi / kk
        nk = -2 * mpmath.cos(four_pi_over_k)
        sin4 = mpmath.sin(four_pi_over_k)
        r8m = _near_integer(float(8 / k), 1e-15)
        if r8m is not None and r8m % 2 == 1:
            # exactly at an odd 8/kappa in floats: use the series limit of g1
            g1 = mpmath.pi * mpmath.sin(mpmath.pi * r8m / 2) / mpmath.factorial(r8m - 2)
        else:
            g1 = nk * mpmath.gamma(2 - 8 / kk)
        r4m = _near_integer(float(4 / k), 1e-15)
        if r4m is not None:
            g2 = mpmath.pi / mpmath.factorial(r4m - 1)
        else:
            g2 = sin4 * mpmath.gamma(1 - 4 / kk)
        value = nk * (g1 / (4 * g2 * g2)) ** m * (4 * sin4 * sin4) ** n_rep
        out = float(value)
    if math.isinf(out) or math.isnan(out):
        raise PrefactorOverflowError(
            f"prefactor evaluation overflowed at kappa={k}, N={n_pairs}, s={n_rep}"
        )
    return out


def power_bookkeeping(n_pairs: int):
    """Exact rational coefficients (a, b) with power = a/kappa + b for every
    class of integrand power; used for the neutrality check."""
    return {
        "beta": (Fraction(-4), Fraction(0)),
        "beta_conjugate": (Fraction(12), Fraction(-2)),
        "gamma": (Fraction(8), Fraction(0)),
        "external": (Fraction(2), Fraction(0)),
        "external_conjugate": (Fraction(-6), Fraction(1)),
    }
