"""Convergence sweeps: atomistic vs continuum energies over a range of N.

An experiment samples a 1-periodic continuum field at scale ``N``, computes
the atomistic energy per site and the matching continuum energy, and fits the
empirical order ``s`` in ``err ~ C N^-s`` on log-log axes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field as dc_field, fields as dc_fields
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .energy import QuadratureSpec, atomistic_energy, continuum_integral
from .fields import (
    BASE_SHIFT,
    BUILTIN_FIELDS,
    ConnectionRule,
    ScaledField,
    builtin_field,
    fd_tuples,
    sample,
    sup_norms,
)
from .lattice import InteractionRange, range_from_cutoff
from .potentials import (
    BUILTIN_POTENTIALS,
    DomainError,
    ManyBodyToy,
    PairPotential,
    SitePotential,
    bond_site,
    builtin_potential,
    site_potential,
    symmetrize_neg,
    symmetrize_point_bravais,
)

__all__ = [
    "MODELS",
    "SYMMETRIZATIONS",
    "ConfigError",
    "InsufficientPointsError",
    "ExperimentConfig",
    "Setup",
    "Row",
    "FitResult",
    "ConvergenceReport",
    "parse_config",
    "load_config",
    "build",
    "run_experiment",
    "fit_slope",
    "emit",
    "format_csv",
]

MODELS = ("CB_classical", "CB_centroid", "W_eps", "CB_bravais")
SYMMETRIZATIONS = ("none", "neg", "point")
DEFAULT_N = {1: (4, 8, 16, 32, 64, 128), 2: (4, 8, 16, 32, 64), 3: (4, 8, 16)}
CSV_COLUMNS = ("N", "e_atomistic_per_site", "e_continuum", "err", "retained")
GUARD_FRACTION = 0.2


class ConfigError(ValueError):
    pass


class InsufficientPointsError(ValueError):
    pass


def _ints(value) -> tuple:
    if isinstance(value, str):
        value = [v for v in value.replace(",", " ").split() if v]
    return tuple(int(v) for v in value)


@dataclass(frozen=True)
class ExperimentConfig:
    """One convergence sweep.

    ``range_cutoff`` is the reference-bond cutoff used to build the
    interaction range; it is kept below the taper onset of the potential so
    that deformed bonds stay where the potential is its raw (analytic) form.
    """

    field: str = "trig_generic"
    amplitude: float = 0.05
    potential: str = "morse_single"
    potential_params: dict = dc_field(default_factory=dict)
    dim: int = 1
    model: str = "CB_classical"
    symmetrize: str = "none"
    N_list: Optional[tuple] = None
    quad_q: int = 5
    quad_tol: Optional[float] = None
    floor: float = 1e-12
    range_cutoff: float = 1.45
    fit_points: int = 4

    def __post_init__(self):
        if self.field not in BUILTIN_FIELDS:
            raise ConfigError(f"unknown field {self.field!r}; expected one of {BUILTIN_FIELDS}")
        if self.potential not in BUILTIN_POTENTIALS:
            raise ConfigError(f"unknown potential {self.potential!r}; expected one of {BUILTIN_POTENTIALS}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.symmetrize not in SYMMETRIZATIONS:
            raise ConfigError(f"unknown symmetrization {self.symmetrize!r}; expected one of {SYMMETRIZATIONS}")
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dim must be in 1..3, got {self.dim}")
        if self.symmetrize == "point" and self.model != "CB_bravais":
            raise ConfigError("point symmetrization is only defined for the Bravais model")
        if self.model == "CB_bravais" and self.symmetrize == "neg":
            raise ConfigError("the Bravais model uses point symmetrization, not neg")
        if self.N_list is not None:
            object.__setattr__(self, "N_list", _ints(self.N_list))
            if not self.N_list or min(self.N_list) < 2:
                raise ConfigError("N_list must be non-empty with every N >= 2")
            if list(self.N_list) != sorted(set(self.N_list)):
                raise ConfigError("N_list must be strictly increasing")
        if self.floor <= 0 or self.range_cutoff <= 0 or self.amplitude < 0:
            raise ConfigError("floor and range_cutoff must be positive, amplitude nonnegative")
        if self.fit_points < 3:
            raise ConfigError("the slope fit needs at least 3 points")
        # fail early on bad potential overrides and quadrature settings
        builtin_potential(self.potential, **self.potential_params)
        self.quadrature

    @property
    def Ns(self) -> tuple:
        return self.N_list if self.N_list is not None else DEFAULT_N[self.dim]

    @property
    def rule(self) -> ConnectionRule:
        return ConnectionRule.CENTROID if self.model == "CB_centroid" else ConnectionRule.CLASSICAL

    @property
    def quadrature(self) -> QuadratureSpec:
        tol = QuadratureSpec.default(self.dim).tol if self.quad_tol is None else self.quad_tol
        try:
            return QuadratureSpec(q=self.quad_q, tol=tol)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["N_list"] = list(self.Ns)
        out["quad_tol"] = self.quadrature.tol
        out["rule"] = self.rule.name.lower()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        names = {f.name for f in dc_fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


_CASTS = {
    "field": str,
    "amplitude": float,
    "potential": str,
    "dim": int,
    "model": str,
    "symmetrize": str,
    "N_list": _ints,
    "quad_q": int,
    "quad_tol": float,
    "floor": float,
    "range_cutoff": float,
    "fit_points": int,
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``potential.<param> = value`` overrides a parameter of the named
    potential, e.g. ``potential.r0_01 = 0.9``.
    """
    kwargs, params = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("potential."):
            params[key.split(".", 1)[1]] = float(value)
            continue
        if key not in _CASTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            kwargs[key] = _CASTS[key](value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
    return ExperimentConfig(potential_params=params, **kwargs)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# -- model assembly -----------------------------------------------------------


@dataclass(frozen=True)
class Setup:
    field: object
    V: SitePotential
    rule: ConnectionRule
    reference_range: InteractionRange
    nearest_bond: float


def reference_range(dim: int, cutoff: float, bravais: bool = False) -> tuple[InteractionRange, float]:
    """Interaction range of the reference 2-lattice ``Z^d u (Z^d + pbar)`` and its shortest bond."""
    pbar = np.array(BASE_SHIFT[:dim])
    rng = range_from_cutoff(np.eye(dim), (np.zeros(dim), pbar), cutoff)
    if bravais:
        rng = rng.select(lambda mi: mi.alpha == 0 and mi.beta == 0)
    bonds = rng.rho + (rng.beta - rng.alpha)[:, None] * pbar
    return rng, float(np.linalg.norm(bonds, axis=-1).min())


def build(cfg: ExperimentConfig) -> Setup:
    """Assemble the field and site potential of a config after checking they are compatible."""
    bravais = cfg.model == "CB_bravais"
    rng, nearest = reference_range(cfg.dim, cfg.range_cutoff, bravais)
    potential = builtin_potential(cfg.potential, **cfg.potential_params).with_guard(GUARD_FRACTION * nearest)

    field = builtin_field(cfg.field, cfg.dim, cfg.amplitude)
    if bravais:
        field = field.without_shift()

    if cfg.symmetrize == "point":
        if not isinstance(potential, PairPotential):
            raise ConfigError("point symmetrization needs a pair potential")
        V = symmetrize_point_bravais(bond_site(potential, rng))
    elif cfg.symmetrize == "neg":
        if not potential.is_single_species:
            raise ConfigError("neg symmetrization preserves energies only for single-species potentials")
        base = bond_site(potential, rng) if isinstance(potential, PairPotential) else site_potential(potential, rng)
        V = symmetrize_neg(base)
    else:
        V = site_potential(potential, rng)

    if cfg.model == "CB_centroid" and not (potential.is_single_species and "neg" in V.certificates):
        raise ConfigError("CB_centroid needs a single-species potential with a neg certificate")
    if cfg.model == "W_eps" and "sim" not in V.certificates:
        raise ConfigError("W_eps needs a sim-certified (species-symmetric pair) potential")
    if bravais and not field.shift_free:
        raise ConfigError("CB_bravais needs a shift-free field")
    return Setup(field, V, cfg.rule, rng, nearest)


# -- reports ------------------------------------------------------------------


@dataclass
class Row:
    N: int
    e_atomistic_per_site: float
    e_continuum: float
    err: float
    retained: bool


class FitResult(NamedTuple):
    slope: float
    residual: float
    retained: int


def fit_slope(rows, floor: float = 1e-12, points: Optional[int] = 4) -> FitResult:
    """Least-squares slope of ``log err`` against ``-log N``.

    ``rows`` holds :class:`Row` objects or ``(N, err)`` pairs. Rows with
    ``err <= floor`` are dropped; of the rest the ``points`` largest ``N``
    enter the fit (all of them if ``points`` is None). The residual is the
    RMS misfit in log space.
    """
    pairs = [(r.N, r.err) if isinstance(r, Row) else (r[0], r[1]) for r in rows]
    kept = sorted((int(n), float(e)) for n, e in pairs if e > floor)
    if points is not None:
        kept = kept[-points:]
    if len(kept) < 3:
        raise InsufficientPointsError(f"need at least 3 rows above the floor {floor:g}, got {len(kept)}")
    N, err = np.array(kept, dtype=float).T
    x, y = -np.log(N), np.log(err)
    coef = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))
    return FitResult(float(coef[0]), residual, len(kept))


@dataclass
class ConvergenceReport:
    rows: list
    slope: Optional[float]
    residual: Optional[float]
    fit_count: int
    status: str
    excluded: list
    config: dict
    wall_time: float
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.err for r in self.rows])

    def monotone(self) -> bool:
        """``err(2N) < err(N)`` for every consecutive pair of retained rows."""
        kept = {r.N: r.err for r in self.rows if r.retained}
        return all(kept[2 * n] < e for n, e in kept.items() if 2 * n in kept)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ConvergenceReport:
        data = dict(data)
        data["rows"] = [Row(**r) for r in data["rows"]]
        return cls(**data)


def _bond_extremes(deformation, rng) -> tuple[float, float]:
    r = np.linalg.norm(fd_tuples(deformation, rng), axis=-1)
    return float(r.min()), float(r.max())


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ConvergenceReport:
    """Sweep ``cfg.Ns`` and fit the empirical order of the model error."""
    start = time.perf_counter()
    setup = build(cfg)
    field, V, d = setup.field, setup.V, cfg.dim
    quad = cfg.quadrature
    quad_log = []

    def continuum(eps):
        try:
            res = continuum_integral(field, V, quad, eps, threads)
        except DomainError as exc:
            raise DomainError(f"continuum integrand (eps={eps}): {exc}", exc.index) from exc
        quad_log.append({"eps": eps, "m": res.m, "nodes": res.nodes, "delta": res.delta})
        return res.value

    e_c = None
    rows, r_lo, r_hi = [], math.inf, 0.0
    for N in cfg.Ns:
        deformation = sample(ScaledField(field, N), setup.rule)
        try:
            e_a = atomistic_energy(deformation, V, threads) / N**d
        except DomainError as exc:
            raise DomainError(f"N={N}: {exc}", (N,) + tuple(exc.index or ())) from exc
        lo, hi = _bond_extremes(deformation, V.range)
        r_lo, r_hi = min(r_lo, lo), max(r_hi, hi)
        if cfg.model == "W_eps":
            e_n = continuum(1.0 / N)
        else:
            e_c = continuum(None) if e_c is None else e_c
            e_n = e_c
        err = abs(e_a - e_n)
        rows.append(Row(N, e_a, e_n, err, err > cfg.floor))

    excluded = [r.N for r in rows if not r.retained]
    if len(excluded) == len(rows):
        slope = residual = None
        count, status = 0, "exact"
    else:
        slope, residual, count = fit_slope(rows, cfg.floor, cfg.fit_points)
        status = "fitted"

    potential = builtin_potential(cfg.potential, **cfg.potential_params)
    taper_start = (potential.pair if isinstance(potential, ManyBodyToy) else potential).phi[0][0].r_in
    diagnostics = {
        "range_size": len(V.range),
        "certificates": sorted(V.certificates),
        "fd_gradient": bool(V.fd_gradient),
        "nearest_reference_bond": setup.nearest_bond,
        "min_bond": r_lo,
        "max_bond": r_hi,
        "taper_start": taper_start,
        "bonds_in_taper": bool(r_hi >= taper_start),
        "field_norms": sup_norms(field),
        "quadrature": quad_log,
    }
    return ConvergenceReport(
        rows, slope, residual, count, status, excluded, cfg.to_dict(), time.perf_counter() - start, diagnostics
    )


# -- output -------------------------------------------------------------------


def format_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.rows:
        writer.writerow(
            [r.N, f"{r.e_atomistic_per_site:.17g}", f"{r.e_continuum:.17g}", f"{r.err:.17g}", int(r.retained)]
        )
    return buf.getvalue()


def format_json(report: ConvergenceReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def emit(report: ConvergenceReport, fmt: str = "csv", path=None) -> str:
    """Serialise ``report`` as CSV or JSON, writing it to ``path`` when given."""
    if fmt == "csv":
        text = format_csv(report)
    elif fmt == "json":
        text = format_json(report)
    else:
        raise ValueError(f"unknown format {fmt!r}; expected csv or json")
    if path is not None:
        Path(path).write_text(text)
    return text


# -- suites -------------------------------------------------------------------


@dataclass(frozen=True)
class Sweep:
    """A canonical sweep: one or more generic fields sharing one slope window.

    With several fields the window must hold for at least one of them.
    """

    name: str
    window: tuple
    fields: tuple
    options: dict


GENERIC_FIELDS = ("trig_generic", "trig_aligned")
SECOND_ORDER = (1.8, 2.2)
FIRST_ORDER = (0.8, 1.2)


def rate_sweeps(dims=(1, 2)) -> list:
    sweeps = []
    for d in dims:
        sweeps += [
            Sweep(f"bravais_d{d}", SECOND_ORDER, ("trig_generic",),
                  dict(dim=d, model="CB_bravais", potential="morse_single", symmetrize="point")),
            Sweep(f"classical_d{d}", FIRST_ORDER, GENERIC_FIELDS,
                  dict(dim=d, model="CB_classical", potential="morse_two_species")),
            Sweep(f"centroid_pair_d{d}", SECOND_ORDER, ("trig_generic",),
                  dict(dim=d, model="CB_centroid", potential="morse_single", symmetrize="neg")),
            Sweep(f"centroid_eam_d{d}", SECOND_ORDER, ("trig_generic",),
                  dict(dim=d, model="CB_centroid", potential="eam_toy_single", symmetrize="neg")),
            Sweep(f"weps_d{d}", SECOND_ORDER, ("trig_generic",),
                  dict(dim=d, model="W_eps", potential="morse_two_species")),
            Sweep(f"crosscheck_classical_neg_d{d}", FIRST_ORDER, GENERIC_FIELDS,
                  dict(dim=d, model="CB_classical", potential="morse_single", symmetrize="neg")),
        ]
    return sweeps


def run_sweep(sweep: Sweep, threads: int = 1, out=None):
    """Run every field of ``sweep``; returns the suite check and the reports by field."""
    from .checks import Check

    lo, hi = sweep.window
    reports, verdicts = {}, []
    for name in sweep.fields:
        report = run_experiment(ExperimentConfig(field=name, **sweep.options), threads)
        reports[name] = report
        if out is not None:
            emit(report, "csv", Path(out) / f"{sweep.name}_{name}.csv")
        s = report.slope
        ok = s is not None and lo <= s <= hi and report.monotone()
        verdicts.append((name, ok, s, report.monotone()))
    detail = "; ".join(
        f"{n}: slope={'exact' if s is None else f'{s:.3f}'}{'' if m else ' non-monotone'}" for n, _, s, m in verdicts
    )
    if any(ok for _, ok, _, _ in verdicts):
        status = "PASS"
    elif len(verdicts) > 1:
        status = "INCONCLUSIVE"
    else:
        status = "FAIL"
    best = next((s for _, ok, s, _ in verdicts if ok), verdicts[0][2])
    return Check(sweep.name, status, best, f"in [{lo}, {hi}]", detail), reports


def _print_table(checks, stream):
    width = max(len(c.name) for c in checks)
    for c in checks:
        value = "" if c.value is None else f"{c.value:.3e}"
        print(f"{c.status:<12} {c.name:<{width}}  {value:>10}  {c.limit:<14} {c.detail}", file=stream)
    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"\n{len(failed)} of {len(checks)} checks did not pass:", file=stream)
        for c in failed:
            print(f"  {c.status:<12} {c.name}  {c.detail}", file=stream)
    else:
        print(f"\nall {len(checks)} checks passed", file=stream)


SUITES = ("rates", "symmetry", "all")


def run_suite(name: str, out=None, threads: int = 1, stream=None) -> int:
    """Run a named suite and print its check table; the exit code is 0 iff every check passes."""
    import sys

    from . import checks

    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    stream = sys.stdout if stream is None else stream
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
    results = []
    if name in ("rates", "all"):
        results += [run_sweep(s, threads, out)[0] for s in rate_sweeps()]
    if name in ("symmetry", "all"):
        results += checks.symmetry_battery() + checks.gradient_oracle()
    _print_table(results, stream)
    return 0 if all(c.passed for c in results) else 1
