"""Reference-configuration combinatorics for 2-lattices.

Atoms are addressed by ``(xi, alpha)`` with ``xi`` an integer site and
``alpha`` in {0, 1} the index of the component Bravais lattice. An
interaction is a multi-index ``(rho; alpha, beta)``: the atom of index
``beta`` at site ``xi + rho`` seen from the atom of index ``alpha`` at
site ``xi``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "MultiIndex",
    "InteractionRange",
    "PeriodicCell",
    "SingularStrainError",
    "neg",
    "sim",
    "OPERATORS",
    "close_range",
    "half_range",
    "range_from_cutoff",
    "iter_cell",
    "wrap",
]


class SingularStrainError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class MultiIndex:
    rho: tuple[int, ...]
    alpha: int
    beta: int

    def __post_init__(self):
        rho = tuple(int(r) for r in np.atleast_1d(self.rho))
        object.__setattr__(self, "rho", rho)
        if len(rho) not in (1, 2, 3):
            raise ValueError(f"lattice dimension must be in 1..3, got {len(rho)}")
        if self.alpha not in (0, 1) or self.beta not in (0, 1):
            raise ValueError(f"indices must be 0 or 1, got ({self.alpha}, {self.beta})")
        if self.alpha == self.beta and not any(rho):
            raise ValueError(f"{self} is a self-interaction")

    @property
    def dim(self) -> int:
        return len(self.rho)

    def __repr__(self):
        return f"({self.rho}; {self.alpha}, {self.beta})"


def neg(mi: MultiIndex) -> MultiIndex:
    """(rho; a, b) -> (-rho; 1-a, 1-b): the centroid reflection."""
    return MultiIndex(tuple(-r for r in mi.rho), 1 - mi.alpha, 1 - mi.beta)


def sim(mi: MultiIndex) -> MultiIndex:
    """(rho; a, b) -> (-rho; b, a): the same bond seen from its other end."""
    return MultiIndex(tuple(-r for r in mi.rho), mi.beta, mi.alpha)


OPERATORS = {"neg": neg, "sim": sim}


def _operator(op):
    if callable(op):
        return op
    try:
        return OPERATORS[op]
    except KeyError:
        raise ValueError(f"unknown operator {op!r}; expected one of {sorted(OPERATORS)}") from None


@dataclass(frozen=True)
class InteractionRange:
    """Finite ordered set of multi-indices sharing one dimension.

    The numpy views (``rho``, ``alpha``, ``beta``) follow entry order and are
    what the vectorised kernels consume.
    """

    dim: int
    entries: tuple[MultiIndex, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if self.dim not in (1, 2, 3):
            raise ValueError(f"lattice dimension must be in 1..3, got {self.dim}")
        for mi in entries:
            if mi.dim != self.dim:
                raise ValueError(f"{mi} does not have dimension {self.dim}")
        if len(set(entries)) != len(entries):
            raise ValueError("duplicate entries in interaction range")

    @classmethod
    def from_entries(cls, entries: Iterable, dim: int | None = None) -> InteractionRange:
        """Build from MultiIndex objects or ``(rho, alpha, beta)`` triples."""
        mis = [e if isinstance(e, MultiIndex) else MultiIndex(*e) for e in entries]
        if dim is None:
            if not mis:
                raise ValueError("cannot infer the dimension of an empty range")
            dim = mis[0].dim
        return cls(dim, tuple(mis))

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    def __contains__(self, mi):
        return mi in self._positions

    @cached_property
    def _positions(self) -> dict[MultiIndex, int]:
        return {mi: k for k, mi in enumerate(self.entries)}

    def index(self, mi: MultiIndex) -> int:
        return self._positions[mi]

    @cached_property
    def rho(self) -> np.ndarray:
        out = np.array([mi.rho for mi in self.entries], dtype=np.int64)
        return out.reshape(len(self.entries), self.dim)

    @cached_property
    def alpha(self) -> np.ndarray:
        return np.array([mi.alpha for mi in self.entries], dtype=np.int64)

    @cached_property
    def beta(self) -> np.ndarray:
        return np.array([mi.beta for mi in self.entries], dtype=np.int64)

    def is_closed(self, op) -> bool:
        op = _operator(op)
        return all(op(mi) in self._positions for mi in self.entries)

    @property
    def is_neg_closed(self) -> bool:
        return self.is_closed(neg)

    @property
    def is_sim_closed(self) -> bool:
        return self.is_closed(sim)

    def image_indices(self, op) -> np.ndarray:
        """Position of ``op(entry)`` for every entry; the range must be op-closed."""
        op = _operator(op)
        try:
            return np.array([self._positions[op(mi)] for mi in self.entries], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"range is not closed: missing {exc.args[0]}") from None

    def select(self, predicate) -> InteractionRange:
        return InteractionRange(self.dim, tuple(mi for mi in self.entries if predicate(mi)))

    def sorted(self) -> InteractionRange:
        return InteractionRange(self.dim, tuple(sorted(self.entries)))


@dataclass(frozen=True)
class PeriodicCell:
    N: int
    dim: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"period must be positive, got {self.N}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"lattice dimension must be in 1..3, got {self.dim}")

    @property
    def num_sites(self) -> int:
        return self.N**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    def sites(self) -> np.ndarray:
        """All sites as an ``(N**d, d)`` integer array in lexicographic order."""
        grids = np.meshgrid(*[np.arange(self.N)] * self.dim, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def flat_index(self, xi) -> np.ndarray:
        """Row-major position of (wrapped) sites ``xi`` in :meth:`sites`."""
        xi = wrap(xi, self.N)
        return np.ravel_multi_index(tuple(np.moveaxis(xi, -1, 0)), self.shape)


def close_range(rng: InteractionRange, op) -> InteractionRange:
    """Union of ``rng`` with its image under ``op``, sorted lexicographically."""
    op = _operator(op)
    closed = set(rng.entries) | {op(mi) for mi in rng.entries}
    return InteractionRange(rng.dim, tuple(sorted(closed)))


def half_range(rng: InteractionRange, op) -> InteractionRange:
    """One representative per orbit ``{mi, op(mi)}`` (the lexicographically larger).

    A pair site potential with unit weight on the ``sim`` half counts every
    bond exactly once, which is a convenient non-symmetric site potential.
    """
    op = _operator(op)
    if not rng.is_closed(op):
        raise ValueError("half_range needs an op-closed range")
    return rng.select(lambda mi: mi > op(mi))


def range_from_cutoff(B, shifts: Sequence, r_c: float) -> InteractionRange:
    """All multi-indices whose reference bond ``B rho + p_beta - p_alpha`` is within ``r_c``.

    Shifts are recentred to ``(-p/2, p/2)``; the bond vectors only depend on
    ``p = p1 - p0`` so this does not change the result, but it makes the
    neg/sim closure of the output evident.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    d = B.shape[0]
    if B.shape != (d, d):
        raise ValueError(f"strain must be square, got shape {B.shape}")
    if abs(np.linalg.det(B)) < 1e-12:
        raise SingularStrainError("macro strain is singular")
    if r_c <= 0:
        raise ValueError(f"cutoff must be positive, got {r_c}")
    p0, p1 = (np.asarray(p, dtype=float).reshape(d) for p in shifts)
    p = p1 - p0
    centred = (-0.5 * p, 0.5 * p)

    # |rho|_inf <= |B^-1|_inf (r_c + |p|_inf) covers the cutoff ball for every index pair
    binv = np.abs(np.linalg.inv(B)).sum(axis=1).max()
    bound = int(math.ceil(binv * (r_c + np.abs(p).max()))) + 1
    entries = []
    for rho in itertools.product(range(-bound, bound + 1), repeat=d):
        bonds = B @ np.array(rho, dtype=float)
        for alpha, beta in itertools.product((0, 1), repeat=2):
            if alpha == beta and not any(rho):
                continue
            if np.linalg.norm(bonds + centred[beta] - centred[alpha]) <= r_c:
                entries.append(MultiIndex(rho, alpha, beta))
    return InteractionRange(d, tuple(sorted(entries)))


def iter_cell(cell: PeriodicCell) -> Iterator[tuple[int, ...]]:
    """Sites of the periodic cell {0..N-1}^d in lexicographic order."""
    return itertools.product(range(cell.N), repeat=cell.dim)


def wrap(xi, N: int) -> np.ndarray:
    return np.mod(np.asarray(xi, dtype=np.int64), N)
