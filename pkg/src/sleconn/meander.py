"""The meander (Gram) matrix of the diagram inner product, its determinant
product formula, zero multiplicities, rank at exceptional speeds, and kernel
bases.

Entries of the exponent matrix are loop counts l of diagram products; the
Gram matrix at fugacity n has entries n**l.  An exact big-rational track is
kept alongside floats because the determinants are integer polynomials in n
and float determinants of C_N x C_N matrices lose digits.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import cft
from .diagrams import catalan, enumerate_diagrams, loop_count


def max_pairs_cap(default: int = 8) -> int:
    cap = os.environ.get("SLECONN_MAX_N")
    return int(cap) if cap else default


@dataclass(frozen=True)
class MeanderMatrix:
    n_pairs: int
    exponents: np.ndarray  # integer loop counts, C_N x C_N

    def __post_init__(self):
        e = self.exponents
        e.setflags(write=False)
        assert e.shape[0] == e.shape[1] == catalan(self.n_pairs)


def loop_matrix(n_pairs: int, max_pairs: int | None = None) -> MeanderMatrix:
    """Loop-count exponent matrix over the canonical diagram enumeration."""
    cap = max_pairs if max_pairs is not None else max_pairs_cap()
    if n_pairs > cap:
        raise ValueError(
            f"n_pairs={n_pairs} exceeds cap {cap} (set SLECONN_MAX_N to raise it)"
        )
    diagrams = enumerate_diagrams(n_pairs)
    c = len(diagrams)
    exp = np.zeros((c, c), dtype=np.int64)
    for i, di in enumerate(diagrams):
        exp[i, i] = n_pairs
        for j in range(i + 1, c):
            exp[i, j] = exp[j, i] = loop_count(di, diagrams[j])
    return MeanderMatrix(n_pairs, exp)


def evaluate(matrix: MeanderMatrix, n):
    """Entrywise n**l.  Exact (object array of Fractions) for int/Fraction n,
    float ndarray otherwise."""
    if isinstance(n, (int, Fraction)) and not isinstance(n, bool):
        n = Fraction(n)
        out = np.empty(matrix.exponents.shape, dtype=object)
        for idx, l in np.ndenumerate(matrix.exponents):
            out[idx] = n ** int(l)
        return out
    return float(n) ** matrix.exponents.astype(float)


def a_coeff(n_pairs: int, q: int) -> int:
    """Exponent of the q-th Chebyshev factor in the determinant product."""

    def comb0(n, k):
        return math.comb(n, k) if 0 <= k <= n else 0

    m = 2 * n_pairs
    return (
        comb0(m, n_pairs - q)
        - 2 * comb0(m, n_pairs - q - 1)
        + comb0(m, n_pairs - q - 2)
    )


def chebyshev_u(q: int, n):
    """U_q by the recurrence U_0 = 1, U_1 = n, U_{q+1} = n U_q - U_{q-1}.

    Works for floats, Fractions and anything else with ring arithmetic.
    """
    one = n**0 if not isinstance(n, float) else 1.0
    if q == 0:
        return one
    prev, cur = one, n
    for _ in range(q - 1):
        prev, cur = cur, n * cur - prev
    return cur


def meander_det(n_pairs: int, n):
    """Determinant of the Gram matrix at fugacity n via the product formula."""
    if isinstance(n, int) and not isinstance(n, bool):
        n = Fraction(n)
    out = n**0 if not isinstance(n, float) else 1.0
    for q in range(1, n_pairs + 1):
        a = a_coeff(n_pairs, q)
        if a:
            out = out * chebyshev_u(q, n) ** a
    return out


def det_exact(matrix_of_fractions: np.ndarray) -> Fraction:
    """Exact determinant by fraction-free-ish Gaussian elimination."""
    a = [[Fraction(x) for x in row] for row in matrix_of_fractions]
    m = len(a)
    det = Fraction(1)
    for col in range(m):
        piv = next((r for r in range(col, m) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        inv = 1 / a[col][col]
        for r in range(col + 1, m):
            if a[r][col] == 0:
                continue
            f = a[r][col] * inv
            for c in range(col, m):
                a[r][c] -= f * a[col][c]
    return det


def det_degree(n_pairs: int) -> int:
    """Polynomial degree of the determinant in n: sum of q * a(N, q)."""
    return sum(q * a_coeff(n_pairs, q) for q in range(1, n_pairs + 1))


def multiplicity_d(n_pairs: int, q: int) -> int:
    """Multiplicity of the determinant zero n_{q,q'}; independent of q'."""
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    return sum(a_coeff(n_pairs, p * q - 1) for p in range(1, (n_pairs + 1) // q + 1))


def rank_at(n_pairs: int, kappa) -> int:
    """Rank of the Gram matrix at n(kappa): C_N off the exceptional speeds,
    C_N - d_N(q, q') at kappa_{q,q'} with q <= N+1."""
    c = catalan(n_pairs)
    hit = cft.is_exceptional(kappa, n_pairs)
    if hit is None:
        return c
    return c - multiplicity_d(n_pairs, hit[0])


def kernel_basis(
    n_pairs: int, n: float, threshold: float = 1e-10
) -> list[np.ndarray]:
    """Orthonormal kernel vectors of the Gram matrix at fugacity n.

    Empty when n is not a determinant zero for this size.  Vectors v satisfy
    |M v| <= threshold * ||M||.
    """
    m = evaluate(loop_matrix(n_pairs), float(n))
    _, s, vh = np.linalg.svd(m)
    keep = s <= threshold * s[0]
    return [vh[i] for i in range(len(s)) if keep[i]]
