"""Wick pairings, Dyck paths and crossing tables.

Indices are 1-based throughout: a pairing of ``{1, ..., 2n}`` is stored as
``n`` pairs ``(a_i, b_i)`` with ``a_1 < a_2 < ... < a_n`` and ``a_i < b_i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import accumulate

from .errors import SizeLimitError

DEFAULT_PAIRING_CAP = 6


@dataclass(frozen=True)
class Pairing:
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple(tuple(int(x) for x in p) for p in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        n = len(pairs)
        if n < 1:
            raise ValueError("a pairing needs at least one pair")
        seen = sorted(x for p in pairs for x in p)
        if seen != list(range(1, 2 * n + 1)):
            raise ValueError(f"pairs must cover 1..{2 * n} exactly once: {pairs}")
        for a, b in pairs:
            if not a < b:
                raise ValueError(f"pair {(a, b)} is not ordered")
        if any(p[0] >= q[0] for p, q in zip(pairs, pairs[1:])):
            raise ValueError(f"pairs are not in Wick order: {pairs}")

    @property
    def n(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_pairs(cls, pairs) -> "Pairing":
        """Build from pairs in any order/orientation."""
        norm = sorted(tuple(sorted(p)) for p in pairs)
        return cls(tuple(norm))

    def as_permutation(self) -> tuple[int, ...]:
        """The Wick permutation (pi(1), ..., pi(2n))."""
        return tuple(x for p in self.pairs for x in p)

    def partner(self) -> dict[int, int]:
        out = {}
        for a, b in self.pairs:
            out[a] = b
            out[b] = a
        return out

    def __str__(self):
        return ",".join(f"{a}-{b}" for a, b in self.pairs)


@dataclass(frozen=True)
class DyckPath:
    steps: tuple[int, ...]

    def __post_init__(self):
        steps = tuple(int(s) for s in self.steps)
        object.__setattr__(self, "steps", steps)
        if any(s not in (-1, 1) for s in steps):
            raise ValueError("Dyck steps must be +1 or -1")
        if len(steps) % 2:
            raise ValueError("Dyck path must have even length")
        sums = list(accumulate(steps))
        if sums and sums[-1] != 0:
            raise ValueError("Dyck path must have total sum 0")
        if any(s > 0 for s in sums):
            raise ValueError("Dyck path prefix sums must be <= 0")

    @property
    def n(self) -> int:
        return len(self.steps) // 2

    def __len__(self):
        return len(self.steps)

    def is_irreducible(self) -> bool:
        """True if the path returns to zero only at the end."""
        sums = list(accumulate(self.steps))
        return bool(self.steps) and all(s < 0 for s in sums[:-1])


@dataclass(frozen=True)
class CrossingTable:
    """Crossing sets ``M_0..M_2n`` and toggles ``i_1..i_2n`` of a pairing."""

    sets: tuple[frozenset, ...]
    toggles: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.toggles) // 2

    def membership(self):
        """0/1 matrix of shape (2n+1, n): row j marks members of M_j."""
        import numpy as np

        out = np.zeros((len(self.sets), self.n))
        for j, m in enumerate(self.sets):
            for i in m:
                out[j, i - 1] = 1.0
        return out


def _check_cap(n, cap):
    if n < 1:
        raise ValueError("n must be >= 1")
    if cap is not None and n > cap:
        raise SizeLimitError(
            f"n={n} exceeds the enumeration cap {cap}; "
            f"|W_2n| = (2n-1)!! grows super-exponentially"
        )


def _pair_up(free):
    if not free:
        yield ()
        return
    first, rest = free[0], free[1:]
    for k, other in enumerate(rest):
        remaining = rest[:k] + rest[k + 1 :]
        for tail in _pair_up(remaining):
            yield ((first, other),) + tail


@lru_cache(maxsize=None)
def _pairings(n):
    return tuple(Pairing(p) for p in _pair_up(tuple(range(1, 2 * n + 1))))


def enumerate_pairings(n: int, cap: int | None = DEFAULT_PAIRING_CAP) -> list[Pairing]:
    """All Wick pairings of ``{1..2n}`` in canonical order."""
    _check_cap(n, cap)
    return list(_pairings(n))


def is_interlacing(p: Pairing) -> bool:
    return pairing_to_dyck(p).is_irreducible()


def interlacing_pairings(n: int, cap: int | None = DEFAULT_PAIRING_CAP) -> list[Pairing]:
    return [p for p in enumerate_pairings(n, cap) if is_interlacing(p)]


def pairing_to_dyck(p: Pairing) -> DyckPath:
    steps = [0] * (2 * p.n)
    for a, b in p.pairs:
        steps[a - 1] = -1
        steps[b - 1] = 1
    return DyckPath(tuple(steps))


def _dyck_up(length, height, remaining_down):
    # height <= 0; "down" steps are -1
    if length == 0:
        yield ()
        return
    if remaining_down > 0:
        for tail in _dyck_up(length - 1, height - 1, remaining_down - 1):
            yield (-1,) + tail
    if height < 0:
        for tail in _dyck_up(length - 1, height + 1, remaining_down):
            yield (1,) + tail


def enumerate_dyck(n: int, cap: int | None = DEFAULT_PAIRING_CAP) -> list[DyckPath]:
    _check_cap(n, cap)
    return [DyckPath(s) for s in _dyck_up(2 * n, 0, n)]


def pairings_by_dyck(n: int, cap: int | None = DEFAULT_PAIRING_CAP) -> dict[DyckPath, list[Pairing]]:
    """Fibers of ``pairing_to_dyck`` over the Dyck paths of length 2n."""
    groups = {path: [] for path in enumerate_dyck(n, cap)}
    for p in enumerate_pairings(n, cap):
        groups[pairing_to_dyck(p)].append(p)
    return groups


def crossing_table(p: Pairing) -> CrossingTable:
    n = p.n
    sets = []
    for j in range(2 * n + 1):
        if j == 0 or j == 2 * n:
            sets.append(frozenset())
            continue
        sets.append(frozenset(i for i, (a, b) in enumerate(p.pairs, 1) if a <= j < b))
    owner = {}
    for i, (a, b) in enumerate(p.pairs, 1):
        owner[a] = owner[b] = i
    toggles = tuple(owner[j] for j in range(1, 2 * n + 1))
    return CrossingTable(tuple(sets), toggles)


def dyck_factorize(path: DyckPath) -> tuple[DyckPath | None, DyckPath]:
    """Split ``path`` into a (possibly empty) prefix and an irreducible suffix."""
    if not path.steps:
        raise ValueError("cannot factorize the empty path")
    sums = list(accumulate(path.steps))
    cut = 0
    for k, s in enumerate(sums[:-1], 1):
        if s == 0:
            cut = k
    prefix = DyckPath(path.steps[:cut]) if cut else None
    return prefix, DyckPath(path.steps[cut:])
