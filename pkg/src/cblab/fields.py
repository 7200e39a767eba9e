"""Continuum kinematics (Y, P) together with their atomistic samples.

The module also provides the discrete and continuum directional derivatives.

Array conventions: points ``x`` have shape ``(..., d)``. Derivatives put the
component first, so ``grad_U(x)[..., i, j] = dU_i/dx_j`` and
``hess_U(x)[..., i, j, k] = d^2 U_i / dx_j dx_k``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import InteractionRange, MultiIndex, PeriodicCell

__all__ = [
    "BASE_SHIFT",
    "ContinuumField",
    "TrigField",
    "ScaledField",
    "AtomisticDeformation",
    "ConnectionRule",
    "builtin_field",
    "BUILTIN_FIELDS",
    "sample",
    "recover",
    "homogeneous",
    "fd",
    "fd_tuples",
    "dirder",
    "dirder_eps",
    "dirder_tuples",
    "sup_norms",
]

BASE_SHIFT = (0.5, 0.25, 0.125)
TWO_PI = 2.0 * np.pi


class ContinuumField:
    """A 1-periodic displacement ``U`` and shift ``P`` on top of a macro strain ``B``.

    Subclasses provide ``U, grad_U, hess_U`` and ``P, grad_P``. Third
    derivatives and ``hess_P`` are only needed for diagnostics and the
    ``W_eps`` regularity bound; the defaults raise.
    """

    def __init__(self, B):
        B = np.atleast_2d(np.asarray(B, dtype=float))
        self.B = B
        self.dim = B.shape[0]

    def U(self, x):
        raise NotImplementedError

    def grad_U(self, x):
        raise NotImplementedError

    def hess_U(self, x):
        raise NotImplementedError

    def d3_U(self, x):
        raise NotImplementedError(f"{type(self).__name__} has no third derivatives")

    def P(self, x):
        raise NotImplementedError

    def grad_P(self, x):
        raise NotImplementedError

    def hess_P(self, x):
        raise NotImplementedError(f"{type(self).__name__} has no second shift derivatives")

    def d3_P(self, x):
        raise NotImplementedError(f"{type(self).__name__} has no third shift derivatives")

    def Y(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.B.T + self.U(x)

    def grad_Y(self, x):
        return self.B + self.grad_U(x)

    def hess_Y(self, x):
        return self.hess_U(x)

    def d3_Y(self, x):
        return self.d3_U(x)

    @property
    def shift_free(self) -> bool:
        return False

    def without_shift(self) -> ContinuumField:
        return _ShiftFree(self)


class TrigField(ContinuumField):
    """Single-mode trigonometric field.

    ``U_i(x) = au * sin(2 pi x[ku_i] + phu_i)`` and
    ``P_i(x) = pbar_i + ap * cos(2 pi x[kp_i] + php_i)``. Each component
    depends on one coordinate only, which keeps every derivative in closed form.
    """

    def __init__(self, B, pbar, au, ku, phu, ap, kp, php):
        super().__init__(B)
        d = self.dim
        self.pbar = np.asarray(pbar, dtype=float).reshape(d)
        self.au = float(au)
        self.ap = float(ap)
        self.ku = np.asarray(ku, dtype=np.int64).reshape(d)
        self.kp = np.asarray(kp, dtype=np.int64).reshape(d)
        self.phu = np.asarray(phu, dtype=float).reshape(d)
        self.php = np.asarray(php, dtype=float).reshape(d)

    def _phase(self, x, k, ph):
        x = np.asarray(x, dtype=float)
        return TWO_PI * x[..., k] + ph

    def U(self, x):
        return self.au * np.sin(self._phase(x, self.ku, self.phu))

    def P(self, x):
        return self.pbar + self.ap * np.cos(self._phase(x, self.kp, self.php))

    def _deriv(self, x, order, amp, k, ph, func):
        # component i only varies along e_{k_i}: D^n = amp (2 pi)^n f^(n)(t) e_k (x) ... (x) e_k
        t = self._phase(x, k, ph) + order * np.pi / 2
        vals = amp * TWO_PI**order * (np.sin(t) if func == "sin" else np.cos(t))
        e = np.eye(self.dim)[k]
        tensor = e
        for _ in range(order - 1):
            tensor = tensor[..., None] * e.reshape((self.dim,) + (1,) * (tensor.ndim - 1) + (self.dim,))
        return vals.reshape(vals.shape + (1,) * order) * tensor

    def grad_U(self, x):
        return self._deriv(x, 1, self.au, self.ku, self.phu, "sin")

    def hess_U(self, x):
        return self._deriv(x, 2, self.au, self.ku, self.phu, "sin")

    def d3_U(self, x):
        return self._deriv(x, 3, self.au, self.ku, self.phu, "sin")

    def grad_P(self, x):
        return self._deriv(x, 1, self.ap, self.kp, self.php, "cos")

    def hess_P(self, x):
        return self._deriv(x, 2, self.ap, self.kp, self.php, "cos")

    def d3_P(self, x):
        return self._deriv(x, 3, self.ap, self.kp, self.php, "cos")

    @property
    def shift_free(self) -> bool:
        return self.ap == 0.0 and not self.pbar.any()


class _ShiftFree(ContinuumField):
    def __init__(self, base: ContinuumField):
        super().__init__(base.B)
        self.base = base

    def U(self, x):
        return self.base.U(x)

    def grad_U(self, x):
        return self.base.grad_U(x)

    def hess_U(self, x):
        return self.base.hess_U(x)

    def d3_U(self, x):
        return self.base.d3_U(x)

    def P(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape)

    def grad_P(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.dim,))

    def hess_P(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.dim, self.dim))

    def d3_P(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.dim,) * 3)

    @property
    def shift_free(self) -> bool:
        return True


BUILTIN_FIELDS = ("affine", "trig_generic", "trig_aligned", "trig_shift_only")


def builtin_field(name: str, dim: int, amplitude: float = 0.05, B=None) -> TrigField:
    """Test-field library.

    ``trig_generic`` uses (1-based ``i``) ``U_i = a sin(2 pi x_i + i)`` and
    ``P_i = pbar_i + a cos(2 pi x_{(i mod d)+1} + 2i)`` with
    ``pbar = (0.5, 0.25, 0.125)[:d]``; the phases keep first-order error
    terms from cancelling by parity.

    ``trig_aligned`` is the second generic field: ``P_i`` varies along
    ``x_i`` instead of ``x_{(i mod d)+1}`` (identical to ``trig_generic`` for
    ``d = 1``). In ``d = 2`` the first-order classical error of
    ``trig_generic`` only survives through a ``sin(3)`` phase overlap, which
    leaves it pre-asymptotic at desk-scale ``N``.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"lattice dimension must be in 1..3, got {dim}")
    B = np.eye(dim) if B is None else B
    i = np.arange(1, dim + 1)
    pbar = BASE_SHIFT[:dim]
    ku = i - 1
    kp = i % dim
    if name == "affine":
        return TrigField(B, pbar, 0.0, ku, i, 0.0, kp, 2 * i)
    if name == "trig_generic":
        return TrigField(B, pbar, amplitude, ku, i, amplitude, kp, 2 * i)
    if name == "trig_aligned":
        return TrigField(B, pbar, amplitude, ku, i, amplitude, ku, 2 * i)
    if name == "trig_shift_only":
        return TrigField(B, pbar, 0.0, ku, i, amplitude, kp, 2 * i)
    raise ValueError(f"unknown field {name!r}; expected one of {BUILTIN_FIELDS}")


class ScaledField:
    """``Y^N(x) = N Y(x/N)`` and ``P^N(x) = P(x/N)``: the field in atomic units."""

    def __init__(self, base: ContinuumField, N: int):
        if N < 1:
            raise ValueError(f"N must be positive, got {N}")
        self.base = base
        self.N = int(N)
        self.B = base.B
        self.dim = base.dim

    def _x(self, x):
        return np.asarray(x, dtype=float) / self.N

    def U(self, x):
        return self.N * self.base.U(self._x(x))

    def Y(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.B.T + self.U(x)

    def grad_Y(self, x):
        return self.base.grad_Y(self._x(x))

    def hess_Y(self, x):
        return self.base.hess_Y(self._x(x)) / self.N

    def d3_Y(self, x):
        return self.base.d3_Y(self._x(x)) / self.N**2

    def P(self, x):
        return self.base.P(self._x(x))

    def grad_P(self, x):
        return self.base.grad_P(self._x(x)) / self.N

    def hess_P(self, x):
        return self.base.hess_P(self._x(x)) / self.N**2


class ConnectionRule(enum.Enum):
    """How atom positions at a site are generated from ``(Y, P)``.

    The value holds the coefficients ``c_alpha`` in ``y_alpha = Y + c_alpha P``.
    """

    CLASSICAL = (0.0, 1.0)
    CENTROID = (-0.5, 0.5)

    @classmethod
    def parse(cls, value) -> ConnectionRule:
        if isinstance(value, cls):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ValueError(f"unknown connection rule {value!r}") from None


@dataclass(frozen=True, eq=False)
class AtomisticDeformation:
    """N-periodic deformation ``y_alpha(xi) = B xi + u_alpha(xi mod N)``.

    ``u`` has shape ``(2, N**d, d)``; the site axis follows
    :meth:`PeriodicCell.sites` (lexicographic).
    """

    cell: PeriodicCell
    B: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        u = np.asarray(self.u, dtype=float)
        expected = (2, self.cell.num_sites, self.cell.dim)
        if u.shape != expected:
            raise ValueError(f"displacements must have shape {expected}, got {u.shape}")
        if B.shape != (self.cell.dim, self.cell.dim):
            raise ValueError(f"strain must be {self.cell.dim}x{self.cell.dim}")
        B.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "u", u)

    @property
    def N(self) -> int:
        return self.cell.N

    @property
    def dim(self) -> int:
        return self.cell.dim

    def y(self, alpha: int, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=np.int64)
        return self.B @ xi + self.u[alpha, self.cell.flat_index(xi)]

    def positions(self) -> np.ndarray:
        """``(2, N**d, d)`` array of ``y_alpha(xi)`` over the periodic cell."""
        return self.cell.sites() @ self.B.T + self.u

    def translated(self, c) -> AtomisticDeformation:
        return AtomisticDeformation(self.cell, self.B, self.u + np.asarray(c, dtype=float))


def sample(field: ScaledField, rule=ConnectionRule.CLASSICAL) -> AtomisticDeformation:
    """Atomistic deformation generated from a scaled field under ``rule``."""
    rule = ConnectionRule.parse(rule)
    cell = PeriodicCell(field.N, field.dim)
    xi = cell.sites().astype(float)
    uY = field.U(xi)
    P = field.P(xi)
    c0, c1 = rule.value
    u = np.stack([uY + c0 * P, uY + c1 * P])
    return AtomisticDeformation(cell, field.B, u)


def recover(deformation: AtomisticDeformation, rule=ConnectionRule.CLASSICAL):
    """Grid values ``(Y, P)`` at the sites, inverting :func:`sample`."""
    rule = ConnectionRule.parse(rule)
    y0, y1 = deformation.positions()
    P = y1 - y0
    if rule is ConnectionRule.CENTROID:
        return 0.5 * (y0 + y1), P
    return y0, P


def homogeneous(N: int, F, p0, p1) -> AtomisticDeformation:
    """``y_alpha(xi) = F xi + p_alpha`` on an N-periodic cell."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    d = F.shape[0]
    cell = PeriodicCell(N, d)
    u = np.empty((2, cell.num_sites, d))
    u[0] = np.asarray(p0, dtype=float).reshape(d)
    u[1] = np.asarray(p1, dtype=float).reshape(d)
    return AtomisticDeformation(cell, F, u)


def fd(deformation: AtomisticDeformation, xi, mi: MultiIndex) -> np.ndarray:
    """``y_beta(xi + rho) - y_alpha(xi)``; the affine part is never wrapped."""
    xi = np.asarray(xi, dtype=np.int64).reshape(deformation.dim)
    rho = np.asarray(mi.rho, dtype=np.int64)
    cell = deformation.cell
    u = deformation.u
    return deformation.B @ rho + u[mi.beta, cell.flat_index(xi + rho)] - u[mi.alpha, cell.flat_index(xi)]


def fd_tuples(deformation: AtomisticDeformation, rng: InteractionRange, sites=None) -> np.ndarray:
    """``D_R y(xi)`` for many sites at once, shape ``(n_sites, len(rng), d)``.

    ``sites`` are flat site indices (default: the whole cell).
    """
    cell = deformation.cell
    coords = cell.sites()
    if sites is None:
        sites = np.arange(cell.num_sites)
    xi = coords[sites]
    nbr = cell.flat_index(xi[:, None, :] + rng.rho[None, :, :])
    bonds = rng.rho @ deformation.B.T
    u = deformation.u
    return bonds[None] + u[rng.beta[None, :], nbr] - u[rng.alpha, sites[:, None]]


def dirder(field: ContinuumField, x, mi: MultiIndex) -> np.ndarray:
    """``grad Y(x) rho + (beta - alpha) P(x)``."""
    x = np.asarray(x, dtype=float)
    rho = np.asarray(mi.rho, dtype=float)
    return field.grad_Y(x) @ rho + (mi.beta - mi.alpha) * field.P(x)


def dirder_eps(field: ContinuumField, x, mi: MultiIndex, eps: float) -> np.ndarray:
    """Directional derivative augmented by ``(alpha+beta)/2 * eps * grad P(x) rho``."""
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    x = np.asarray(x, dtype=float)
    rho = np.asarray(mi.rho, dtype=float)
    out = dirder(field, x, mi)
    if eps:
        out = out + 0.5 * (mi.alpha + mi.beta) * eps * (field.grad_P(x) @ rho)
    return out


def dirder_tuples(field: ContinuumField, x, rng: InteractionRange, eps: Optional[float] = None) -> np.ndarray:
    """All directional derivatives over ``rng`` at points ``x``: shape ``(n, len(rng), d)``."""
    x = np.asarray(x, dtype=float).reshape(-1, field.dim)
    rho = rng.rho.astype(float)
    jump = (rng.beta - rng.alpha).astype(float)
    g = np.einsum("nij,rj->nri", field.grad_Y(x), rho)
    g += jump[None, :, None] * field.P(x)[:, None, :]
    if eps:
        weight = 0.5 * (rng.alpha + rng.beta).astype(float) * eps
        g += weight[None, :, None] * np.einsum("nij,rj->nri", field.grad_P(x), rho)
    return g


def sup_norms(field, n: int = 32, period: float = 1.0) -> dict:
    """Sampled max-abs-entry norms of the higher derivatives on an ``n**d`` grid."""
    d = field.dim
    ticks = np.arange(n) * (period / n)
    grids = np.meshgrid(*[ticks] * d, indexing="ij")
    x = np.stack([g.ravel() for g in grids], axis=-1)
    out = {}
    for key, fn in (("hess_Y", "hess_Y"), ("d3_Y", "d3_Y"), ("grad_P", "grad_P"), ("hess_P", "hess_P")):
        try:
            out[key] = float(np.abs(getattr(field, fn)(x)).max())
        except (NotImplementedError, AttributeError):
            out[key] = None
    return out
