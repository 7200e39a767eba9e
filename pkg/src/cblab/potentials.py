"""Site potentials over an interaction range.

A site potential maps the tuple ``g = {g_rho}`` of bond vectors to a scalar.
All evaluators are vectorised over leading axes: ``g`` has shape
``(..., len(range), d)``, :meth:`SitePotential.energy` returns ``(...)`` and
:meth:`SitePotential.gradient` returns the same shape as ``g``.

Symmetry certificates are the labels of the involutions ``op`` (``"neg"``,
``"sim"``) for which ``V(g) = V({-g_{op rho}})`` holds as a function identity.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .fields import dirder_tuples
from .lattice import OPERATORS, InteractionRange, close_range, half_range

__all__ = [
    "DomainError",
    "Morse",
    "LennardJones",
    "ExpDensity",
    "SqrtEmbedding",
    "Tapered",
    "PairPotential",
    "ManyBodyToy",
    "SitePotential",
    "PairSitePotential",
    "ManyBodySitePotential",
    "SymmetrizedSitePotential",
    "FunctionSitePotential",
    "pair_site",
    "bond_site",
    "many_body_site",
    "site_potential",
    "symmetrize_neg",
    "symmetrize_point_bravais",
    "check_derivative_symmetry",
    "builtin_potential",
    "BUILTIN_POTENTIALS",
]


class DomainError(ValueError):
    """A bond is shorter than the guard radius of the potential.

    ``index`` locates the first offending bond in the argument array (leading
    batch indices followed by the range position).
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


# -- radial functions ---------------------------------------------------------


@dataclass(frozen=True)
class Morse:
    D: float = 1.0
    a: float = 3.0
    r0: float = 1.0

    def __call__(self, r):
        e = np.exp(-self.a * (r - self.r0))
        return self.D * (e * e - 2.0 * e)

    def deriv(self, r):
        e = np.exp(-self.a * (r - self.r0))
        return 2.0 * self.a * self.D * (e - e * e)


@dataclass(frozen=True)
class LennardJones:
    epsilon: float = 1.0
    sigma: float = 0.5

    def __call__(self, r):
        s6 = (self.sigma / r) ** 6
        return 4.0 * self.epsilon * (s6 * s6 - s6)

    def deriv(self, r):
        s6 = (self.sigma / r) ** 6
        return -24.0 * self.epsilon * (2.0 * s6 * s6 - s6) / r


@dataclass(frozen=True)
class ExpDensity:
    """Electron-density-like ``A exp(-b (r - r0))``."""

    A: float = 1.0
    b: float = 2.0
    r0: float = 1.0

    def __call__(self, r):
        return self.A * np.exp(-self.b * (r - self.r0))

    def deriv(self, r):
        return -self.b * self(r)


@dataclass(frozen=True)
class SqrtEmbedding:
    """``G(s) = c (sqrt(1 + s) - 1)``; smooth for ``s > -1``."""

    c: float = -1.0

    def __call__(self, s):
        return self.c * (np.sqrt(1.0 + s) - 1.0)

    def deriv(self, s):
        return 0.5 * self.c / np.sqrt(1.0 + s)


@dataclass(frozen=True)
class Tapered:
    """``f(r) S(t)`` with the C3 switch ``S(t) = 1 - t^4 (35 - 84 t + 70 t^2 - 20 t^3)``.

    ``t = (r - r_in)/(r_c - r_in)`` and ``r_in = inner * r_c``. ``S`` and its
    first three derivatives are 1, 0, 0, 0 at ``t = 0`` and 0, 0, 0, 0 at
    ``t = 1``, so the product matches ``f`` to third order at ``r_in`` and
    vanishes to third order at ``r_c``.
    """

    raw: object
    r_c: float
    inner: float = 0.9

    @property
    def r_in(self) -> float:
        return self.inner * self.r_c

    def _t(self, r):
        return np.clip((r - self.r_in) / (self.r_c - self.r_in), 0.0, 1.0)

    def switch(self, r):
        t = self._t(r)
        t4 = t**4
        return 1.0 - t4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t**3)

    def switch_deriv(self, r):
        t = self._t(r)
        return -140.0 * t**3 * (1.0 - t) ** 3 / (self.r_c - self.r_in)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = r < self.r_c
        rr = np.where(inside, r, self.r_in)
        return np.where(inside, self.raw(rr) * self.switch(rr), 0.0)

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        inside = r < self.r_c
        rr = np.where(inside, r, self.r_in)
        val = self.raw.deriv(rr) * self.switch(rr) + self.raw(rr) * self.switch_deriv(rr)
        return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class PairPotential:
    """Species-resolved pair potentials ``phi[alpha][beta]``.

    Symmetry flags are decided by object identity, so sharing one function
    object between ``phi[0][1]`` and ``phi[1][0]`` is what declares species
    symmetry.
    """

    phi: tuple
    r_c: float
    r_min: float = 0.1

    @classmethod
    def single(cls, phi, r_c, r_min=0.1) -> PairPotential:
        return cls(((phi, phi), (phi, phi)), r_c, r_min)

    @property
    def is_species_symmetric(self) -> bool:
        return self.phi[0][1] is self.phi[1][0]

    @property
    def is_single_species(self) -> bool:
        f = self.phi[0][0]
        return all(p is f for row in self.phi for p in row)

    def with_guard(self, r_min: float) -> PairPotential:
        return dataclasses.replace(self, r_min=float(r_min))


@dataclass(frozen=True)
class ManyBodyToy:
    """EAM-like ``V(g) = G(sum psi(|g_rho|)) + 1/2 sum phi(|g_rho|)``."""

    embedding: object
    density: object
    pair: PairPotential

    @property
    def r_c(self) -> float:
        return self.pair.r_c

    @property
    def r_min(self) -> float:
        return self.pair.r_min

    @property
    def is_single_species(self) -> bool:
        return self.pair.is_single_species

    @property
    def is_species_symmetric(self) -> bool:
        return self.pair.is_species_symmetric

    def with_guard(self, r_min: float) -> ManyBodyToy:
        return dataclasses.replace(self, pair=self.pair.with_guard(r_min))


# -- site potentials ----------------------------------------------------------


class SitePotential:
    """Base class: a scalar function of the bond tuple over ``range``."""

    fd_gradient = False

    def __init__(self, rng: InteractionRange, certificates=()):
        self.range = rng
        self.certificates = frozenset(certificates)
        for op in self.certificates:
            if not rng.is_closed(op):
                raise ValueError(f"certificate {op!r} needs an {op}-closed range")

    @property
    def dim(self) -> int:
        return self.range.dim

    def energy(self, g):
        raise NotImplementedError

    def gradient(self, g):
        raise NotImplementedError

    def __call__(self, g):
        return self.energy(g)

    def _check_shape(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape[-2:] != (len(self.range), self.dim):
            raise ValueError(f"expected bond tuples of shape (..., {len(self.range)}, {self.dim}), got {g.shape}")
        return g


def _species_groups(pp: PairPotential, rng: InteractionRange):
    """Group range positions by the (identical) radial function they use."""
    groups = []
    for alpha in (0, 1):
        for beta in (0, 1):
            f = pp.phi[alpha][beta]
            mask = (rng.alpha == alpha) & (rng.beta == beta)
            for k, (g, m) in enumerate(groups):
                if g is f:
                    groups[k] = (g, m | mask)
                    break
            else:
                groups.append((f, mask))
    return [(f, np.flatnonzero(m)) for f, m in groups if m.any()]


def _pair_certificates(potential, rng: InteractionRange):
    certs = []
    if potential.is_species_symmetric and rng.is_sim_closed:
        certs.append("sim")
    if potential.is_single_species and rng.is_neg_closed:
        certs.append("neg")
    return certs


class PairSitePotential(SitePotential):
    """``V(g) = weight * sum phi_{alpha beta}(|g_rho|)``.

    ``weight = 1/2`` is the usual site energy with every bond shared by its
    two ends; ``weight = 1`` on a one-sided range counts each bond once.
    """

    def __init__(self, pp: PairPotential, rng: InteractionRange, weight: float = 0.5, certificates=None):
        if certificates is None:
            certificates = _pair_certificates(pp, rng)
        super().__init__(rng, certificates)
        self.pair = pp
        self.weight = float(weight)
        self._groups = _species_groups(pp, rng)

    def _lengths(self, g):
        r = np.linalg.norm(g, axis=-1)
        bad = r < self.pair.r_min
        if bad.any():
            index = tuple(int(i) for i in np.argwhere(bad)[0])
            raise DomainError(
                f"bond length {r[index]:.3g} below guard radius {self.pair.r_min:.3g} at {index}", index
            )
        return r

    def bond_values(self, r):
        out = np.empty_like(r)
        for f, idx in self._groups:
            out[..., idx] = f(r[..., idx])
        return out

    def bond_derivs(self, r):
        out = np.empty_like(r)
        for f, idx in self._groups:
            out[..., idx] = f.deriv(r[..., idx])
        return out

    def energy(self, g):
        g = self._check_shape(g)
        return self.weight * self.bond_values(self._lengths(g)).sum(axis=-1)

    def gradient(self, g):
        g = self._check_shape(g)
        r = self._lengths(g)
        return (self.weight * self.bond_derivs(r) / r)[..., None] * g


class ManyBodySitePotential(SitePotential):
    def __init__(self, toy: ManyBodyToy, rng: InteractionRange, certificates=None):
        if certificates is None:
            certificates = _pair_certificates(toy, rng)
        super().__init__(rng, certificates)
        self.toy = toy
        self._pair = PairSitePotential(toy.pair, rng, 0.5, certificates=())

    def energy(self, g):
        g = self._check_shape(g)
        r = self._pair._lengths(g)
        s = self.toy.density(r).sum(axis=-1)
        return self.toy.embedding(s) + 0.5 * self._pair.bond_values(r).sum(axis=-1)

    def gradient(self, g):
        g = self._check_shape(g)
        r = self._pair._lengths(g)
        s = self.toy.density(r).sum(axis=-1)
        dG = self.toy.embedding.deriv(s)[..., None]
        radial = dG * self.toy.density.deriv(r) + 0.5 * self._pair.bond_derivs(r)
        return (radial / r)[..., None] * g


class SymmetrizedSitePotential(SitePotential):
    """``V~(g) = 1/2 V({g_rho}) + 1/2 V({-g_{op rho}})`` on ``R u op(R)``."""

    def __init__(self, base: SitePotential, op: str):
        rng = close_range(base.range, op)
        super().__init__(rng, {op})
        self.base = base
        self.op = op
        image = OPERATORS[op]
        self._direct = np.array([rng.index(mi) for mi in base.range], dtype=np.int64)
        self._mirror = np.array([rng.index(image(mi)) for mi in base.range], dtype=np.int64)
        self.fd_gradient = base.fd_gradient

    def energy(self, g):
        g = self._check_shape(g)
        return 0.5 * self.base.energy(g[..., self._direct, :]) + 0.5 * self.base.energy(-g[..., self._mirror, :])

    def gradient(self, g):
        g = self._check_shape(g)
        out = np.zeros_like(g)
        out[..., self._direct, :] += 0.5 * self.base.gradient(g[..., self._direct, :])
        out[..., self._mirror, :] -= 0.5 * self.base.gradient(-g[..., self._mirror, :])
        return out


class FunctionSitePotential(SitePotential):
    """Black-box ``V`` with a central-difference gradient (``fd_gradient = True``)."""

    fd_gradient = True

    def __init__(self, rng: InteractionRange, fn, certificates=(), h: float = 1e-6):
        super().__init__(rng, certificates)
        self.fn = fn
        self.h = h

    def energy(self, g):
        return np.asarray(self.fn(self._check_shape(g)), dtype=float)

    def gradient(self, g):
        g = self._check_shape(g)
        out = np.empty_like(g)
        for k in range(g.shape[-2]):
            for i in range(g.shape[-1]):
                gp = g.copy()
                gm = g.copy()
                gp[..., k, i] += self.h
                gm[..., k, i] -= self.h
                out[..., k, i] = (self.fn(gp) - self.fn(gm)) / (2.0 * self.h)
        return out


def pair_site(pp: PairPotential, rng: InteractionRange) -> PairSitePotential:
    """``V(g) = 1/2 sum_rho phi_{alpha beta}(|g_rho|)``."""
    return PairSitePotential(pp, rng, 0.5)


def bond_site(pp: PairPotential, rng: InteractionRange) -> PairSitePotential:
    """One-sided pair potential counting each bond once.

    Uses unit weight on the ``sim``-half of ``rng``; its lattice energy equals
    that of :func:`pair_site` on ``rng`` but it has no point symmetry.
    """
    return PairSitePotential(pp, half_range(rng, "sim"), 1.0)


def many_body_site(toy: ManyBodyToy, rng: InteractionRange) -> ManyBodySitePotential:
    return ManyBodySitePotential(toy, rng)


def site_potential(potential, rng: InteractionRange) -> SitePotential:
    if isinstance(potential, ManyBodyToy):
        return many_body_site(potential, rng)
    return pair_site(potential, rng)


def symmetrize_neg(V: SitePotential) -> SymmetrizedSitePotential:
    return SymmetrizedSitePotential(V, "neg")


def symmetrize_point_bravais(V: SitePotential) -> SymmetrizedSitePotential:
    """Point symmetrisation ``rho -> -rho`` of a Bravais site potential.

    Bravais ranges are encoded with ``alpha = beta = 0`` throughout, where the
    reflection ``rho -> -rho`` is exactly ``sim``; the result carries ``sim``.
    """
    if V.range.alpha.any() or V.range.beta.any():
        raise ValueError("Bravais site potentials must only use (rho; 0, 0) entries")
    return SymmetrizedSitePotential(V, "sim")


def check_derivative_symmetry(V: SitePotential, field, x, op: str, eps: float | None = None) -> float:
    """``max_rho |V_rho(g) + V_{op rho}(g)|`` at ``g`` = directional derivatives of ``field`` at ``x``."""
    image = V.range.image_indices(op)
    g = dirder_tuples(field, x, V.range, eps)
    grad = V.gradient(g)
    return float(np.abs(grad + grad[..., image, :]).max())


# -- built-in potentials ------------------------------------------------------

BUILTIN_POTENTIALS = ("morse_single", "morse_two_species", "lj_smooth_single", "eam_toy_single")


def _morse_single(D=1.0, a=3.0, r0=1.0, r_c=2.2, r_min=0.1):
    return PairPotential.single(Tapered(Morse(D, a, r0), r_c), r_c, r_min)


def _morse_two_species(D=1.0, a=3.0, r0_00=1.0, r0_01=0.95, r0_11=1.05, r_c=2.2, r_min=0.1):
    mixed = Tapered(Morse(D, a, r0_01), r_c)
    phi = ((Tapered(Morse(D, a, r0_00), r_c), mixed), (mixed, Tapered(Morse(D, a, r0_11), r_c)))
    return PairPotential(phi, r_c, r_min)


def _lj_smooth_single(epsilon=1.0, sigma=0.5, r_c=2.2, r_min=0.1):
    return PairPotential.single(Tapered(LennardJones(epsilon, sigma), r_c), r_c, r_min)


def _eam_toy_single(c=-1.0, A=1.0, b=2.0, rho0=1.0, D=1.0, a=3.0, r0=1.0, r_c=2.2, r_min=0.1):
    pair = _morse_single(D, a, r0, r_c, r_min)
    return ManyBodyToy(SqrtEmbedding(c), Tapered(ExpDensity(A, b, rho0), r_c), pair)


_BUILDERS = {
    "morse_single": _morse_single,
    "morse_two_species": _morse_two_species,
    "lj_smooth_single": _lj_smooth_single,
    "eam_toy_single": _eam_toy_single,
}


def builtin_potential(name: str, **overrides):
    """Named potential with its C3 taper; keyword overrides replace default parameters."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; expected one of {BUILTIN_POTENTIALS}") from None
    try:
        return builder(**{k: float(v) for k, v in overrides.items()})
    except TypeError:
        raise ValueError(f"invalid parameter override for {name}: {sorted(overrides)}") from None
