"""Atomistic and Cauchy-Born continuum energies on periodic 2-lattices.

The package sums periodic lattice energies exactly and compares them with
Cauchy-Born continuum energies to measure the order at which the two agree
as the lattice spacing goes to zero.
"""

from .convergence import (
    ConvergenceReport,
    ExperimentConfig,
    emit,
    fit_slope,
    load_config,
    parse_config,
    run_experiment,
    run_suite,
)
from .energy import (
    QuadratureSpec,
    atomistic_energy,
    cb_density,
    cb_energy,
    eps_energy,
    integrate_periodic,
)
from .fields import (
    AtomisticDeformation,
    ConnectionRule,
    ContinuumField,
    ScaledField,
    TrigField,
    builtin_field,
    dirder,
    dirder_eps,
    fd,
    homogeneous,
    recover,
    sample,
)
from .lattice import InteractionRange, MultiIndex, PeriodicCell, neg, range_from_cutoff, sim
from .potentials import (
    DomainError,
    PairPotential,
    SitePotential,
    bond_site,
    builtin_potential,
    check_derivative_symmetry,
    pair_site,
    site_potential,
    symmetrize_neg,
    symmetrize_point_bravais,
)

__version__ = "0.1.0"
