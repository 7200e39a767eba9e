"""Periodic lattice energies and their Cauchy-Born continuum counterparts on the unit cell.

Reductions use :func:`math.fsum` over per-site (per-node) values produced in a
fixed chunk layout, so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .fields import AtomisticDeformation, ContinuumField, dirder_tuples, fd_tuples
from .potentials import DomainError, SitePotential

__all__ = [
    "QuadratureSpec",
    "QuadratureResult",
    "QuadratureError",
    "EnergyReport",
    "atomistic_energy",
    "site_energies",
    "cb_density",
    "integrate_periodic",
    "continuum_integral",
    "cb_energy",
    "eps_energy",
]

SITE_CHUNK = 2048
NODE_CHUNK = 8192


class QuadratureError(RuntimeError):
    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite tensor Gauss-Legendre rule on [0, 1)^d.

    ``m`` subcells per axis with ``q`` nodes each; ``m`` starts at ``m0`` and
    doubles until successive estimates differ by less than ``tol``.
    """

    q: int = 5
    m0: int = 4
    tol: float = 1e-12
    m_max: int = 1024

    def __post_init__(self):
        if not 3 <= self.q <= 10:
            raise ValueError(f"Gauss-Legendre order must be in 3..10, got {self.q}")
        if self.m0 < 1 or self.m_max < self.m0:
            raise ValueError("need 1 <= m0 <= m_max")
        if self.tol <= 0:
            raise ValueError("quadrature tolerance must be positive")

    @classmethod
    def default(cls, dim: int) -> QuadratureSpec:
        return cls(tol=1e-12 if dim <= 2 else 1e-10)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    m: int
    nodes: int
    delta: float
    history: tuple = ()

    def as_dict(self) -> dict:
        return {"value": self.value, "m": self.m, "nodes": self.nodes, "delta": self.delta}


@dataclass
class EnergyReport:
    N: int
    model: str
    e_atomistic_per_site: float
    e_continuum: float
    quadrature: dict = dc_field(default_factory=dict)

    @property
    def err(self) -> float:
        return abs(self.e_atomistic_per_site - self.e_continuum)


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def site_energies(deformation: AtomisticDeformation, V: SitePotential, threads: int = 1) -> np.ndarray:
    """``V(D_R y(xi))`` for every site of the periodic cell, lexicographic order."""
    if V.dim != deformation.dim:
        raise ValueError("potential and deformation have different dimensions")
    n = deformation.cell.num_sites
    chunks = [np.arange(s, min(s + SITE_CHUNK, n)) for s in range(0, n, SITE_CHUNK)]

    def work(sites):
        g = fd_tuples(deformation, V.range, sites)
        try:
            return V.energy(g)
        except DomainError as exc:
            local = exc.index[0] if exc.index else 0
            xi = tuple(int(c) for c in deformation.cell.sites()[sites[local]])
            k = int(np.argmin(np.linalg.norm(g[local], axis=-1)))
            raise DomainError(f"{exc} (site {xi}, bond {V.range[k]})", (xi, V.range[k])) from exc

    return np.concatenate(_map(work, chunks, threads))


def atomistic_energy(deformation: AtomisticDeformation, V: SitePotential, threads: int = 1) -> float:
    """Total energy ``sum_xi V(D_R y(xi))`` of the periodic cell."""
    return math.fsum(site_energies(deformation, V, threads))


def cb_density(F, P, V: SitePotential) -> float:
    """``W(F, P) = V({F rho + (beta - alpha) P})``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    P = np.asarray(P, dtype=float).reshape(V.dim)
    rng = V.range
    g = rng.rho @ F.T + (rng.beta - rng.alpha)[:, None] * P
    return float(V.energy(g[None])[0])


def _rule(q: int, m: int):
    t, w = np.polynomial.legendre.leggauss(q)
    nodes = ((np.arange(m)[:, None] + 0.5 * (t[None, :] + 1.0)) / m).ravel()
    weights = np.tile(w / (2.0 * m), m)
    return nodes, weights


def _composite(f: Callable, dim: int, q: int, m: int, threads: int, origin) -> float:
    nodes, weights = _rule(q, m)
    per_axis = nodes.size
    total = per_axis**dim
    shape = (per_axis,) * dim

    def work(start):
        idx = np.unravel_index(np.arange(start, min(start + NODE_CHUNK, total)), shape)
        x = np.stack([nodes[i] for i in idx], axis=-1) + origin
        w = np.prod([weights[i] for i in idx], axis=0)
        return w * f(x)

    parts = _map(work, list(range(0, total, NODE_CHUNK)), threads)
    return math.fsum(np.concatenate(parts))


def integrate_periodic(
    f: Callable, dim: int, spec: QuadratureSpec = QuadratureSpec(), threads: int = 1, origin=None
) -> QuadratureResult:
    """Integrate a 1-periodic ``f`` over the unit cell with doubling refinement.

    ``origin`` shifts the cell (``[s, s+1)^d``); for periodic integrands the
    value must not change beyond the tolerance.
    """
    origin = np.zeros(dim) if origin is None else np.asarray(origin, dtype=float).reshape(dim)
    m = spec.m0
    history = [(m, _composite(f, dim, spec.q, m, threads, origin))]
    while True:
        m *= 2
        if m > spec.m_max:
            (_, a), (_, b) = history[-2:] if len(history) > 1 else (history[-1], history[-1])
            raise QuadratureError(f"quadrature did not reach tol={spec.tol:g}; last estimates {a!r}, {b!r}", (a, b))
        value = _composite(f, dim, spec.q, m, threads, origin)
        delta = abs(value - history[-1][1])
        history.append((m, value))
        if delta < spec.tol:
            return QuadratureResult(value, m, (m * spec.q) ** dim, delta, tuple(history))


def continuum_integral(
    field: ContinuumField,
    V: SitePotential,
    quad: Optional[QuadratureSpec] = None,
    eps: Optional[float] = None,
    threads: int = 1,
    origin=None,
) -> QuadratureResult:
    """``int_Omega V(grad_R (Y, P)(x)) dx``, optionally with the shift-gradient term ``eps``."""
    if V.dim != field.dim:
        raise ValueError("potential and field have different dimensions")
    quad = QuadratureSpec.default(field.dim) if quad is None else quad

    def integrand(x):
        return V.energy(dirder_tuples(field, x, V.range, eps))

    return integrate_periodic(integrand, field.dim, quad, threads, origin)


def cb_energy(field: ContinuumField, V: SitePotential, quad: Optional[QuadratureSpec] = None, threads: int = 1) -> float:
    """Cauchy-Born energy of ``(Y, P)`` on the unit cell (per atomistic site)."""
    return continuum_integral(field, V, quad, None, threads).value


def eps_energy(
    field: ContinuumField, V: SitePotential, N: int, quad: Optional[QuadratureSpec] = None, threads: int = 1
) -> float:
    """Shift-gradient energy ``int_Omega V(grad^eps_R (Y, P)) dx`` with ``eps = 1/N``.

    Only defined here for ``sim``-symmetric (pair) site potentials.
    """
    if "sim" not in V.certificates:
        raise ValueError("eps_energy needs a sim-certified site potential")
    if N < 2:
        raise ValueError(f"N must be at least 2, got {N}")
    return continuum_integral(field, V, quad, 1.0 / N, threads).value
