"""Randomised identity batteries over the lattice and potential layers.

Each function returns :class:`Check` records rather than raising, so the same
code drives the ``symmetry`` suite and the test-suite assertions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import atomistic_energy
from .fields import (
    BASE_SHIFT,
    BUILTIN_FIELDS,
    AtomisticDeformation,
    ScaledField,
    TrigField,
    builtin_field,
    fd_tuples,
    homogeneous,
)
from .lattice import PeriodicCell, range_from_cutoff
from .potentials import (
    bond_site,
    builtin_potential,
    check_derivative_symmetry,
    pair_site,
    site_potential,
    symmetrize_neg,
    symmetrize_point_bravais,
)

__all__ = [
    "Check",
    "certified_potentials",
    "reflection_identity",
    "function_identities",
    "derivative_symmetry",
    "energy_invariance",
    "potential_gradients",
    "field_derivatives",
    "symmetry_battery",
    "gradient_oracle",
]

CUTOFF = 1.45
DIMS = (1, 2)


@dataclass(frozen=True)
class Check:
    name: str
    status: str
    value: float | None = None
    limit: str = ""
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    @classmethod
    def bound(cls, name, value, tol, detail=""):
        value = float(value)
        return cls(name, "PASS" if value <= tol else "FAIL", value, f"<= {tol:g}", detail)


def _range(dim):
    pbar = np.array(BASE_SHIFT[:dim])
    return range_from_cutoff(np.eye(dim), (np.zeros(dim), pbar), CUTOFF), pbar


def certified_potentials(dim: int) -> dict:
    """Site potentials over the reference range that carry at least one certificate."""
    rng, _ = _range(dim)
    bravais = rng.select(lambda mi: mi.alpha == 0 and mi.beta == 0)
    single = builtin_potential("morse_single")
    eam = builtin_potential("eam_toy_single")
    return {
        "pair_morse_single": pair_site(single, rng),
        "pair_morse_two_species": pair_site(builtin_potential("morse_two_species"), rng),
        "pair_lj_single": pair_site(builtin_potential("lj_smooth_single"), rng),
        "eam_toy": site_potential(eam, rng),
        "neg_bond_morse": symmetrize_neg(bond_site(single, rng)),
        "neg_eam_toy": symmetrize_neg(site_potential(eam, rng)),
        "point_bravais_morse": symmetrize_point_bravais(bond_site(single, bravais)),
    }


def _reference_tuples(V, pbar, rs, n, noise=0.05):
    rng = V.range
    bonds = rng.rho + (rng.beta - rng.alpha)[:, None] * pbar
    return bonds[None] + noise * rs.standard_normal((n, len(rng), V.dim))


def _random_field(dim, rs):
    i = np.arange(dim)
    B = np.eye(dim) + 0.02 * rs.standard_normal((dim, dim))
    pbar = np.array(BASE_SHIFT[:dim]) + 0.02 * rs.standard_normal(dim)
    return TrigField(
        B,
        pbar,
        rs.uniform(0.0, 0.05),
        rs.integers(0, dim, dim),
        rs.uniform(0, 2 * np.pi, dim),
        rs.uniform(0.0, 0.05),
        rs.integers(0, dim, dim) if dim > 1 else i,
        rs.uniform(0, 2 * np.pi, dim),
    )


def reflection_identity(states: int = 10, seed: int = 0, tol: float = 1e-13) -> list:
    """``D_rho y = -D_{neg rho} y`` for homogeneous states with centred shifts."""
    rs = np.random.default_rng(seed)
    out = []
    for d in DIMS:
        rng, _ = _range(d)
        image = rng.image_indices("neg")
        worst = 0.0
        for _ in range(states):
            F = np.eye(d) + 0.1 * rs.standard_normal((d, d))
            p = rs.standard_normal(d)
            g = fd_tuples(homogeneous(4, F, -0.5 * p, 0.5 * p), rng)
            worst = max(worst, float(np.abs(g + g[:, image]).max()))
        out.append(Check.bound(f"reflection_identity_d{d}", worst, tol, f"{states} states, {len(rng)} entries"))
    return out


def function_identities(tuples: int = 200, seed: int = 1, tol: float = 1e-12) -> list:
    """``V(g) = V(-g_{op rho})`` for every certificate ``op`` of every certified potential."""
    rs = np.random.default_rng(seed)
    out = []
    for d in DIMS:
        _, pbar = _range(d)
        for label, V in certified_potentials(d).items():
            g = _reference_tuples(V, pbar, rs, tuples)
            for op in sorted(V.certificates):
                image = V.range.image_indices(op)
                defect = np.abs(V.energy(g) - V.energy(-g[:, image])).max()
                out.append(Check.bound(f"identity_{op}_{label}_d{d}", defect, tol, f"{tuples} tuples"))
    return out


def derivative_symmetry(samples: int = 50, seed: int = 2, tol: float = 1e-10) -> list:
    """``V_rho(g) = -V_{op rho}(g)`` at directional-derivative arguments of random fields.

    For ``sim`` the shift-gradient arguments (random ``eps``) are covered too.
    """
    rs = np.random.default_rng(seed)
    out = []
    for d in DIMS:
        for label, V in certified_potentials(d).items():
            for op in sorted(V.certificates):
                worst = 0.0
                for _ in range(samples):
                    field = _random_field(d, rs)
                    if label.startswith("point_bravais"):
                        field = field.without_shift()
                    x = rs.uniform(0, 1, d)
                    eps = rs.uniform(0, 0.25) if op == "sim" else None
                    worst = max(worst, check_derivative_symmetry(V, field, x, op, eps))
                out.append(Check.bound(f"dersym_{op}_{label}_d{d}", worst, tol, f"{samples} (field, x)"))
    return out


def _random_deformation(dim, pbar, rs, N=4, noise=0.05):
    cell = PeriodicCell(N, dim)
    u = noise * rs.standard_normal((2, cell.num_sites, dim))
    u[1] += pbar
    return AtomisticDeformation(cell, np.eye(dim), u)


def energy_invariance(deformations: int = 20, seed: int = 3, tol: float = 1e-11) -> list:
    """Total periodic energy unchanged by symmetrisation (relative defect)."""
    rs = np.random.default_rng(seed)
    out = []
    single = builtin_potential("morse_single")
    eam = builtin_potential("eam_toy_single")
    for d in DIMS:
        rng, pbar = _range(d)
        bravais = rng.select(lambda mi: mi.alpha == 0 and mi.beta == 0)
        cases = {
            "neg_bond_morse": (bond_site(single, rng), symmetrize_neg),
            "neg_pair_morse": (pair_site(single, rng), symmetrize_neg),
            "neg_eam_toy": (site_potential(eam, rng), symmetrize_neg),
            "point_bravais_morse": (bond_site(single, bravais), symmetrize_point_bravais),
        }
        for label, (V, sym) in cases.items():
            Vt = sym(V)
            worst = 0.0
            for _ in range(deformations):
                y = _random_deformation(d, pbar, rs)
                e, et = atomistic_energy(y, V), atomistic_energy(y, Vt)
                worst = max(worst, abs(e - et) / abs(e))
            out.append(Check.bound(f"invariance_{label}_d{d}", worst, tol, f"{deformations} deformations, N=4"))
    return out


def _rel(a, b):
    scale = np.abs(b).max()
    diff = np.abs(a - b).max()
    return float(diff / scale) if scale > 0 else float(diff)


def potential_gradients(tuples: int = 50, seed: int = 4, h: float = 1e-6, tol: float = 1e-6) -> list:
    """Analytic ``V`` gradients against central differences."""
    rs = np.random.default_rng(seed)
    out = []
    for d in DIMS:
        _, pbar = _range(d)
        potentials = dict(certified_potentials(d))
        rng, _ = _range(d)
        potentials["bond_morse_two_species"] = bond_site(builtin_potential("morse_two_species"), rng)
        for label, V in potentials.items():
            g = _reference_tuples(V, pbar, rs, tuples)
            grad = V.gradient(g)
            fd = np.empty_like(g)
            for k in range(g.shape[1]):
                for i in range(d):
                    e = np.zeros_like(g)
                    e[:, k, i] = h
                    fd[:, k, i] = (V.energy(g + e) - V.energy(g - e)) / (2 * h)
            worst = max(_rel(grad[n], fd[n]) for n in range(tuples))
            out.append(Check.bound(f"gradient_{label}_d{d}", worst, tol, f"{tuples} tuples, h={h:g}"))
    return out


def _fd_deriv(fn, x, h):
    """Central difference of ``fn`` along each coordinate, derivative index last."""
    d = x.shape[-1]
    cols = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        cols.append((fn(x + e) - fn(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


FIELD_PAIRS = (
    ("grad_U", "U"),
    ("hess_U", "grad_U"),
    ("d3_U", "hess_U"),
    ("grad_P", "P"),
    ("hess_P", "grad_P"),
    ("d3_P", "hess_P"),
)
SCALED_PAIRS = (("grad_Y", "Y"), ("hess_Y", "grad_Y"), ("grad_P", "P"), ("hess_P", "grad_P"))


def field_derivatives(points: int = 100, seed: int = 5, h: float = 1e-5, tol: float = 1e-6) -> list:
    """Analytic field derivatives against central differences of the next-lower derivative."""
    rs = np.random.default_rng(seed)
    out = []
    for d in (1, 2, 3):
        for name in BUILTIN_FIELDS:
            field = builtin_field(name, d, 0.05)
            x = rs.uniform(0, 1, (points, d))
            worst = max(_rel(getattr(field, a)(x), _fd_deriv(getattr(field, b), x, h)) for a, b in FIELD_PAIRS)
            out.append(Check.bound(f"field_{name}_d{d}", worst, tol, f"{points} points, h={h:g}"))
        scaled = ScaledField(builtin_field("trig_generic", d, 0.05), 4)
        x = rs.uniform(0, 4, (points, d))
        worst = max(_rel(getattr(scaled, a)(x), _fd_deriv(getattr(scaled, b), x, h)) for a, b in SCALED_PAIRS)
        out.append(Check.bound(f"field_scaled_trig_generic_d{d}", worst, tol, f"N=4, {points} points"))
    return out


def symmetry_battery() -> list:
    return reflection_identity() + function_identities() + derivative_symmetry() + energy_invariance()


def gradient_oracle() -> list:
    return potential_gradients() + field_derivatives()
