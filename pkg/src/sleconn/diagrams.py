"""Arc connectivity diagrams: noncrossing perfect matchings of 2N boundary points.

A diagram is stored as its partner sequence, e.g. (2, 1, 4, 3) pairs 1 with 2
and 3 with 4.  The same object serves as an interior diagram (limit
functionals) or an exterior diagram (integration contours); only the caller's
context differs.  Diagrams of a given size are totally ordered
lexicographically on the partner sequence, and enumeration follows that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache


class DiagramError(ValueError):
    pass


def catalan(n: int) -> int:
    """Number of noncrossing pairings of 2n points, (2n)!/(n!(n+1)!)."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    # Python ints are arbitrary precision, so no silent wraparound is possible;
    # math.comb raises on bad input rather than overflowing.
    return math.comb(2 * n, n) // (n + 1)


@dataclass(frozen=True)
class ArcDiagram:
    """A fixed-point-free noncrossing involution of {1, ..., 2N}.

    ``pairing[k]`` is the partner of point k+1 (entries are 1-based).
    """

    pairing: tuple[int, ...]

    def __post_init__(self):
        p = self.pairing
        n2 = len(p)
        if n2 == 0 or n2 % 2:
            raise DiagramError(f"need an even positive number of points, got {n2}")
        for i, j in enumerate(p, start=1):
            if not 1 <= j <= n2 or j == i or p[j - 1] != i:
                raise DiagramError(f"not a fixed-point-free involution: {p}")
        for a in range(1, n2 + 1):
            c = p[a - 1]
            if c <= a:
                continue
            for b in range(a + 1, c):
                d = p[b - 1]
                if not a < d < c:  # partner of an enclosed point escapes (a, c)
                    raise DiagramError(f"crossing arcs ({a},{c}) and ({b},{d})")

    @property
    def n_pairs(self) -> int:
        return len(self.pairing) // 2

    def partner(self, i: int) -> int:
        return self.pairing[i - 1]

    def arcs(self) -> list[tuple[int, int]]:
        """Arc endpoint pairs (a, b) with a < b, sorted by left endpoint."""
        return [(a, b) for a, b in enumerate(self.pairing, start=1) if a < b]

    def has_arc(self, a: int, b: int) -> bool:
        return self.pairing[a - 1] == b

    def __str__(self) -> str:
        return " ".join(str(j) for j in self.pairing)

    @classmethod
    def from_arcs(cls, arcs, n_pairs: int) -> "ArcDiagram":
        p = [0] * (2 * n_pairs)
        for a, b in arcs:
            p[a - 1], p[b - 1] = b, a
        return cls(tuple(p))

    @classmethod
    def parse(cls, text: str) -> "ArcDiagram":
        """Inverse of str(): parse a whitespace-separated partner sequence."""
        return cls(tuple(int(tok) for tok in text.split()))


def _gen_pairings(points: tuple[int, ...]):
    # point[0] pairs with an odd-offset point; both sides recurse independently,
    # which is exactly the noncrossing condition.
    if not points:
        yield ()
        return
    first = points[0]
    for k in range(1, len(points), 2):
        mate = points[k]
        for inner in _gen_pairings(points[1:k]):
            for outer in _gen_pairings(points[k + 1:]):
                yield ((first, mate),) + inner + outer


@lru_cache(maxsize=32)
def enumerate_diagrams(n_pairs: int) -> tuple[ArcDiagram, ...]:
    """All catalan(N) diagrams of size N, in lexicographic partner-sequence order."""
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be >= 1, got {n_pairs}")
    diagrams = [
        ArcDiagram.from_arcs(arcs, n_pairs)
        for arcs in _gen_pairings(tuple(range(1, 2 * n_pairs + 1)))
    ]
    diagrams.sort(key=lambda d: d.pairing)
    return tuple(diagrams)


def diagram_index(d: ArcDiagram) -> int:
    """1-based position of d in the canonical enumeration of its size."""
    return enumerate_diagrams(d.n_pairs).index(d) + 1


def loop_count(interior: ArcDiagram, exterior: ArcDiagram) -> int:
    """Number of closed loops formed by alternating interior and exterior arcs.

    Each of the 2N vertices lies on exactly one loop; the count is the exponent
    l such that the diagram product evaluates to fugacity**l.
    """
    if interior.n_pairs != exterior.n_pairs:
        raise DiagramError(
            f"size mismatch: {interior.n_pairs} vs {exterior.n_pairs} pairs"
        )
    n2 = 2 * interior.n_pairs
    seen = [False] * (n2 + 1)
    loops = 0
    for start in range(1, n2 + 1):
        if seen[start]:
            continue
        loops += 1
        v = start
        while not seen[v]:
            seen[v] = True
            w = interior.partner(v)
            seen[w] = True
            v = exterior.partner(w)
    return loops


def collapse_arc(d: ArcDiagram, i: int) -> ArcDiagram:
    """Delete the adjacent arc (i, i+1) and relabel the remaining points."""
    if not (1 <= i < 2 * d.n_pairs) or d.partner(i) != i + 1:
        raise DiagramError(f"points {i} and {i+1} are not partners in {d}")
    new = []
    for a, b in d.arcs():
        if (a, b) == (i, i + 1):
            continue
        new.append((a - 2 * (a > i), b - 2 * (b > i)))
    return ArcDiagram.from_arcs(new, d.n_pairs - 1)


def insert_arc(d: ArcDiagram, i: int) -> ArcDiagram:
    """Insert a new adjacent arc at positions (i, i+1), shifting labels >= i up by 2."""
    if not 1 <= i <= 2 * d.n_pairs + 1:
        raise DiagramError(f"insertion index {i} out of range for {d}")
    new = [(a + 2 * (a >= i), b + 2 * (b >= i)) for a, b in d.arcs()]
    new.append((i, i + 1))
    return ArcDiagram.from_arcs(new, d.n_pairs + 1)


def chi_map(d: ArcDiagram, i: int) -> ArcDiagram:
    """Cut the two arcs ending at i and i+1 and rejoin so that i pairs with i+1.

    The freed partners pair with each other; every other arc is untouched.  The
    result is again noncrossing and carries the adjacent arc (i, i+1).
    """
    if not (1 <= i < 2 * d.n_pairs):
        raise DiagramError(f"index {i} out of range for {d}")
    a, b = d.partner(i), d.partner(i + 1)
    if a == i + 1:
        raise DiagramError(f"{i} and {i+1} are already partners in {d}")
    new = [arc for arc in d.arcs() if i not in arc and i + 1 not in arc]
    new.append((i, i + 1))
    new.append((min(a, b), max(a, b)))
    return ArcDiagram.from_arcs(new, d.n_pairs)


def adjacent_arcs(d: ArcDiagram) -> list[int]:
    """Left endpoints i of all arcs pairing adjacent points (i, i+1)."""
    return [a for a, b in d.arcs() if b == a + 1]
