"""Scenario runner for the reservoir library.

Each subcommand configures one study — steady pair driving, tuning
calculation, imperfection sweeps, the entangled-stream channel, its
perturbative formula, Wigner grids, or stream amplitude expansion — runs the
corresponding pipeline, and writes a human-readable summary plus CSV data
files into an output directory.

Conventions shared by every mode:

* Angle-valued options accept plain radians ("0.5236") or pi fractions
  ("pi/6", "-pi/4.5", "pi").  Grid options accept comma lists of angles or a
  "start:stop:step" range (endpoints angle-parsed, stop inclusive up to
  rounding).
* A flat ``key = value`` config file can seed any option; command-line flags
  override the file, which overrides built-in defaults.
* CSV output uses 9 significant digits, comma delimiters, LF endings, and a
  leading comment line recording n_max / tolerances / tail mass, so each file
  is self-describing.  Identical configs produce byte-identical CSVs; the
  only timestamp lives in the summary header.
* Exit status: 0 success, 1 invalid configuration, 2 numerical failure
  (tuning outside the representable family, or — under ``--strict`` —
  non-convergence / tail-mass breach).
"""

from __future__ import annotations

import argparse
import datetime
import math
import multiprocessing
import os
import re
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .fock_space import (
    DEFAULT_N_MAX,
    TAIL_LIMIT,
    DensityMatrix,
    SqueezeTarget,
    tail_mass,
    vacuum_state,
)
from .imperfections import (
    ImperfectionConfig,
    dephased_pair,
    optimize_squeezing,
    write_scan_csv,
)
from .observables import QuadratureStats, quad_stats, squeezing_db, wigner, write_wigner_csv
from .pair_reservoir import PairTuning, simulate_pair_reservoir, tune
from .stream_reservoir import (
    mps_coefficients,
    perturbative_steady,
    simulate_stream_reservoir,
)

MODES = (
    "pair-steady",
    "pair-tune",
    "imperfect-sweep",
    "stream-steady",
    "stream-formula",
    "wigner",
    "mps-expand",
)

_ANGLE_RE = re.compile(r"([+-]?)pi(?:/([0-9]+(?:\.[0-9]*)?))?\Z")


def parse_angle(text: str) -> float:
    """Angle in radians from a decimal literal or a pi fraction like "pi/4.5"."""
    s = str(text).strip().lower().replace(" ", "")
    m = _ANGLE_RE.match(s)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        denom = float(m.group(2)) if m.group(2) else 1.0
        if denom == 0.0:
            raise ValueError(f"invalid angle {text!r}: zero denominator")
        return sign * math.pi / denom
    try:
        return float(s)
    except ValueError:
        raise ValueError(
            f"invalid angle {text!r}: expected radians or 'pi/<number>'"
        ) from None


def parse_grid(text: str) -> tuple[float, ...]:
    """Grid from "a,b,c" angle tokens or an inclusive "start:stop:step" range."""
    s = str(text).strip()
    if not s:
        return ()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ValueError(f"invalid grid {text!r}: ranges need start:stop:step")
        start, stop, step = (parse_angle(p) for p in parts)
        if step <= 0.0:
            raise ValueError(f"invalid grid {text!r}: step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise ValueError(f"invalid grid {text!r}: empty range")
        return tuple(start + k * step for k in range(count))
    return tuple(parse_angle(tok) for tok in s.split(",") if tok.strip())


_FIELD_KINDS = {
    "theta": "angle",
    "u": "angle",
    "mu": "angle",
    "epsilon": "angle",
    "chi": "angle",
    "phi": "angle",
    "phi_r": "angle",
    "r": "float",
    "alpha_re": "float",
    "alpha_im": "float",
    "eta": "float",
    "omega_over_gamma": "float",
    "tol": "float",
    "half_width": "float",
    "n_max": "int",
    "steps": "int",
    "record_every": "int",
    "n_qubits": "int",
    "resolution": "int",
    "workers": "int",
    "u_grid": "grid",
    "theta_grid": "grid",
    "phi_grid": "grid",
    "source": "str",
    "output_dir": "str",
    "simulate": "bool",
    "strict": "bool",
}

_DEFAULT_WORKERS = os.cpu_count() or 1

_MODE_DEFAULTS: dict[str, dict[str, object]] = {
    "pair-steady": {"steps": 20_000, "tol": 1e-7, "record_every": 1},
    "pair-tune": {},
    "imperfect-sweep": {"steps": 80_000, "tol": 1e-7},
    "stream-steady": {"steps": 200_000, "tol": 1e-8, "record_every": 100},
    "stream-formula": {"steps": 200_000, "tol": 1e-8},
    "wigner": {"steps": 20_000, "tol": 1e-7},
    "mps-expand": {},
}


def _coerce(key: str, value: object) -> object:
    kind = _FIELD_KINDS[key]
    if not isinstance(value, str):
        return value
    try:
        if kind == "angle":
            return parse_angle(value)
        if kind == "float":
            return float(value)
        if kind == "int":
            return int(value)
        if kind == "grid":
            return parse_grid(value)
        if kind == "bool":
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"expected a boolean, got {value!r}")
        return value
    except ValueError as exc:
        raise ValueError(f"{key}: {exc}") from None


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully resolved scenario: mode, parameters, and output location.

    Optional parameters stay ``None`` when a mode does not use them;
    ``validate`` enforces the per-mode required set and global bounds.
    """

    mode: str
    theta: float | None = None
    u: float | None = None
    mu: float = 0.0
    epsilon: float = 0.0
    chi: float = 0.0
    phi: float | None = None
    r: float | None = None
    phi_r: float | None = None
    alpha_re: float = 0.0
    alpha_im: float = 0.0
    eta: float = 1.0
    omega_over_gamma: float = math.inf
    n_max: int = DEFAULT_N_MAX
    steps: int = 20_000
    tol: float = 1e-7
    record_every: int = 1
    u_grid: tuple[float, ...] = ()
    theta_grid: tuple[float, ...] = ()
    phi_grid: tuple[float, ...] = ()
    n_qubits: int | None = None
    source: str = "vacuum"
    resolution: int = 81
    half_width: float = 2.5
    simulate: bool = False
    workers: int = _DEFAULT_WORKERS
    output_dir: str = "."
    strict: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode: unknown mode {self.mode!r}")
        if self.n_max < 10:
            raise ValueError(f"n_max: must be at least 10, got {self.n_max}")
        if self.steps < 1:
            raise ValueError(f"steps: must be positive, got {self.steps}")
        if self.tol <= 0.0:
            raise ValueError(f"tol: must be positive, got {self.tol}")
        if self.record_every < 0:
            raise ValueError(f"record_every: must be >= 0, got {self.record_every}")
        if self.workers < 1:
            raise ValueError(f"workers: must be positive, got {self.workers}")
        need = {
            "pair-steady": ("theta", "u"),
            "pair-tune": ("theta", "r", "phi_r"),
            "imperfect-sweep": (),
            "stream-steady": ("phi", "theta"),
            "stream-formula": ("theta",),
            "wigner": (),
            "mps-expand": ("phi", "n_qubits"),
        }[self.mode]
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"{name}: required for mode {self.mode}")
        if self.mode in ("pair-steady", "imperfect-sweep"):
            if not 0.0 <= self.eta <= 1.0:
                raise ValueError(f"eta: must lie in [0, 1], got {self.eta}")
            if self.omega_over_gamma <= 0.0:
                raise ValueError(
                    f"omega_over_gamma: must be positive, got {self.omega_over_gamma}"
                )
        if self.mode == "pair-steady" and self.eta < 1.0 and self.epsilon != 0.0:
            raise ValueError(
                "eta: dephasing is modeled for epsilon = 0 pairs only"
            )
        if self.mode == "imperfect-sweep":
            if not self.u_grid:
                raise ValueError("u_grid: must be non-empty for imperfect-sweep")
            if not self.theta_grid:
                raise ValueError("theta_grid: must be non-empty for imperfect-sweep")
        if self.mode == "stream-formula" and self.phi is None and not self.phi_grid:
            raise ValueError("phi: provide phi or phi_grid for stream-formula")
        if self.mode == "wigner":
            if self.source not in ("vacuum", "pair", "stream"):
                raise ValueError(f"source: unknown wigner source {self.source!r}")
            if self.source == "pair" and (self.theta is None or self.u is None):
                raise ValueError("theta: wigner source 'pair' needs theta and u")
            if self.source == "stream" and (self.theta is None or self.phi is None):
                raise ValueError("phi: wigner source 'stream' needs phi and theta")
            if self.resolution < 2:
                raise ValueError(f"resolution: must be >= 2, got {self.resolution}")
            if self.half_width <= 0.0:
                raise ValueError(
                    f"half_width: must be positive, got {self.half_width}"
                )
        if self.mode == "mps-expand" and self.n_qubits is not None:
            if not 2 <= self.n_qubits <= 12:
                raise ValueError(
                    f"n_qubits: must lie in [2, 12], got {self.n_qubits}"
                )


def load_config_file(path: str | Path) -> dict[str, object]:
    """Flat ``key = value`` file -> raw option dict (values still strings)."""
    pairs: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "mode" or key not in _FIELD_KINDS:
            raise ValueError(f"{path}:{lineno}: unknown option {key!r}")
        pairs[key] = value
    return pairs


def build_config(mode: str, *overrides: dict[str, object]) -> ScenarioConfig:
    """Merge defaults, config-file pairs, and flag pairs (later wins)."""
    merged: dict[str, object] = dict(_MODE_DEFAULTS[mode])
    for layer in overrides:
        for key, value in layer.items():
            if value is None:
                continue
            merged[key] = value
    coerced = {key: _coerce(key, value) for key, value in merged.items()}
    cfg = ScenarioConfig(mode=mode, **coerced)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt(value: float | None) -> str:
    if value is None:
        return "-"
    if value == 0.0:
        return "0"
    return f"{value:.4g}"


def _render_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in rows))
        for i in range(len(headers))
    ]
    def line(cells: Sequence[str]) -> str:
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells)).rstrip()
    return [line(headers), *(line(row) for row in rows)]


_TABLE_HEADERS = (
    "",
    "<X_0>",
    "<X_pi/2>",
    "phi_r",
    "dX_(phi_r/2)",
    "dX_(phi_r/2+pi/2)",
    "kappa",
    "r_eff[dB]",
)


def _table_row(
    label: str,
    x0: float | None,
    xpi2: float | None,
    phi_r: float | None,
    d_first: float | None,
    d_second: float | None,
    kappa: float | None,
) -> tuple[str, ...]:
    db = None
    if d_first is not None and d_second is not None:
        db = squeezing_db(min(d_first, d_second))
    return (
        label,
        _fmt(x0),
        _fmt(xpi2),
        _fmt(phi_r),
        _fmt(d_first),
        _fmt(d_second),
        _fmt(kappa),
        _fmt(db),
    )


def _variance_along(stats: QuadratureStats, angle: float) -> float:
    direction = np.array([math.cos(angle), math.sin(angle)])
    return float(direction @ stats.var_matrix @ direction)


def _summary_head(cfg: ScenarioConfig) -> list[str]:
    return [
        f"# qubitbath {cfg.mode} summary",
        f"# generated: {datetime.datetime.now().isoformat(timespec='seconds')}",
    ]


def _write_lines(path: Path, lines: Sequence[str]) -> None:
    path.write_text("\n".join(lines) + "\n")


def _write_trajectory_csv(
    path: Path, cfg: ScenarioConfig, run_tail: float, trajectory: Sequence[QuadratureStats],
    steps_taken: int,
) -> None:
    cadence = max(cfg.record_every, 1)
    lines = [
        f"# n_max={cfg.n_max} steps={cfg.steps} tol={cfg.tol:.9g}"
        f" record_every={cfg.record_every} tail_mass={run_tail:.9g}",
        "step,mean_x0,mean_xpi2,delta_min,delta_max,phi_min,r_eff_db,purity",
    ]
    for i, s in enumerate(trajectory):
        step = min((i + 1) * cadence, steps_taken)
        if i == len(trajectory) - 1:
            step = steps_taken
        lines.append(
            f"{step},{s.mean_x0:.9g},{s.mean_xpi2:.9g},{s.delta_min:.9g},"
            f"{s.delta_max:.9g},{s.phi_min:.9g},{s.r_eff_db:.9g},{s.purity:.9g}"
        )
    _write_lines(path, lines)


def _run_flags(converged: bool, tail_ok: bool) -> list[str]:
    flags = []
    if not converged:
        flags.append("fixed-point iteration did not converge within the step budget")
    if not tail_ok:
        flags.append("truncation tail mass exceeds the validity limit")
    return flags


# ---------------------------------------------------------------------------
# Pair-frame theory row
# ---------------------------------------------------------------------------


def _tuning_to_target(t: PairTuning) -> tuple[SqueezeTarget, float]:
    """Invert the four-angle pair tuning back to (target, kappa).

    Inverse of the tuning calculator: the ee phase fixes the squeeze axis,
    the ground/excited balance fixes tanh of the squeeze parameter, and the
    cross amplitude fixes |alpha| through the same interference factor the
    forward map uses.  Raises ValueError when the cross amplitude is
    incompatible with the diagonal angles (interference factor outside
    (0, 2)).
    """
    th = -math.tan(t.u)
    r_s = math.atanh(th)
    phi_r = t.mu
    kappa = 2.0 * t.theta**2 * math.cos(2.0 * t.u)
    if t.epsilon == 0.0:
        alpha = 0.0 + 0.0j
    else:
        s2u = math.sin(2.0 * t.u)
        factor_sq = (1.0 - s2u) * (1.0 + s2u) / (
            1.0 + math.cos(phi_r - 2.0 * t.chi) * s2u
        )
        if not 0.0 < factor_sq < 2.0:
            raise ValueError(
                "chi: cross amplitude incompatible with the diagonal tuning"
            )
        mag = abs(t.epsilon) * math.sqrt(2.0) / (t.theta * math.sqrt(factor_sq))
        chi_rel = t.chi - phi_r / 2.0
        psi = math.atan2(
            math.sin(chi_rel) / (1.0 - th), math.cos(chi_rel) / (1.0 + th)
        )
        alpha = mag * np.exp(1j * (psi + phi_r / 2.0))
    return SqueezeTarget(alpha=alpha, r=r_s, phi_r=phi_r), kappa


def _phi_r_display(target: SqueezeTarget) -> float:
    """Squeeze-axis phase as summary tables list it.

    Tables quote the axis in the reflected frame (table angle = minus the
    internal angle) and fold a negative squeeze parameter into a pi shift of
    the axis, so both rows show a positive squeeze strength.
    """
    shift = math.pi if target.r < 0.0 else 0.0
    return (-(target.phi_r + shift)) % (2.0 * math.pi)


def _pair_theory_row(t: PairTuning) -> tuple[tuple[str, ...], SqueezeTarget]:
    target, kappa = _tuning_to_target(t)
    r_s = target.r
    phi_r_display = _phi_r_display(target)
    row = _table_row(
        "theory",
        target.alpha.imag,
        target.alpha.real,
        phi_r_display,
        math.exp(-r_s) / 2.0,
        math.exp(r_s) / 2.0,
        kappa,
    )
    return row, target


def _pair_sim_row(t: PairTuning, stats: QuadratureStats) -> tuple[str, ...]:
    target, _ = _tuning_to_target(t)
    phi_r_display = _phi_r_display(target)
    axis = -t.mu / 2.0
    return _table_row(
        "simulation",
        -stats.mean_xpi2,
        stats.mean_x0,
        phi_r_display,
        math.sqrt(_variance_along(stats, axis)),
        math.sqrt(_variance_along(stats, axis + math.pi / 2.0)),
        None,
    )


# ---------------------------------------------------------------------------
# Mode runners (each returns a list of numerical-warning strings)
# ---------------------------------------------------------------------------


def _run_pair_steady(cfg: ScenarioConfig, out: Path) -> list[str]:
    tuning = PairTuning(
        u=cfg.u, theta=cfg.theta, mu=cfg.mu, epsilon=cfg.epsilon, chi=cfg.chi
    )
    decay = None
    if math.isfinite(cfg.omega_over_gamma):
        decay = cfg.theta / cfg.omega_over_gamma
    if cfg.eta < 1.0:
        source = dephased_pair(
            math.cos(cfg.u), math.sin(cfg.u) * np.exp(1j * cfg.mu), cfg.eta
        )
        run = simulate_pair_reservoir(
            source,
            cfg.theta,
            n_max=cfg.n_max,
            steps=cfg.steps,
            decay=decay,
            tol=cfg.tol,
            record_every=cfg.record_every,
        )
    else:
        run = simulate_pair_reservoir(
            tuning,
            n_max=cfg.n_max,
            steps=cfg.steps,
            decay=decay,
            tol=cfg.tol,
            record_every=cfg.record_every,
        )
    stats = run.trajectory[-1]
    theory, _ = _pair_theory_row(tuning)
    table = _render_table(_TABLE_HEADERS, [theory, _pair_sim_row(tuning, stats)])
    flags = _run_flags(run.converged, run.tail_ok)
    lines = _summary_head(cfg) + [
        f"# n_max={cfg.n_max} steps={cfg.steps} tol={cfg.tol:.9g}"
        f" eta={cfg.eta:.9g} omega_over_gamma={cfg.omega_over_gamma:.9g}",
        f"# steps_taken={run.steps_taken} converged={run.converged}"
        f" residual={run.residual:.3e} tail_mass={run.tail_mass:.3e}",
        "",
        *table,
    ]
    if flags:
        lines += ["", *(f"warning: {f}" for f in flags)]
    _write_lines(out / "summary.txt", lines)
    _write_trajectory_csv(
        out / "trajectory.csv", cfg, run.tail_mass, run.trajectory, run.steps_taken
    )
    print("\n".join(lines))
    return flags


def _run_pair_tune(cfg: ScenarioConfig, out: Path) -> list[str]:
    target = SqueezeTarget(
        alpha=cfg.alpha_re + 1j * cfg.alpha_im, r=cfg.r, phi_r=cfg.phi_r
    )
    report = tune(target, cfg.theta)
    t = report.tuning
    theory, _ = _pair_theory_row(t)
    table = _render_table(_TABLE_HEADERS, [theory])
    lines = _summary_head(cfg) + [
        f"# theta={cfg.theta:.9g}",
        "",
        f"u       = {t.u:.9g}",
        f"mu      = {t.mu:.9g}",
        f"epsilon = {t.epsilon:.9g}",
        f"chi     = {t.chi:.9g}",
        f"kappa   = {report.kappa:.9g}",
        "",
        *table,
    ]
    _write_lines(out / "summary.txt", lines)
    print("\n".join(lines))
    return []


def _run_imperfect_sweep(cfg: ScenarioConfig, out: Path) -> list[str]:
    imp = ImperfectionConfig(
        eta=cfg.eta,
        omega_over_gamma=cfg.omega_over_gamma,
        theta=cfg.theta_grid[0],
        u=cfg.u_grid[0],
    )
    scan = optimize_squeezing(
        imp,
        cfg.u_grid,
        cfg.theta_grid,
        cfg.n_max,
        steps=cfg.steps,
        tol=cfg.tol,
        workers=cfg.workers,
    )
    scan_path = out / "scan.csv"
    write_scan_csv(scan, scan_path)
    header = (
        f"# n_max={cfg.n_max} steps={cfg.steps} tol={cfg.tol:.9g}"
        f" eta={cfg.eta:.9g} omega_over_gamma={cfg.omega_over_gamma:.9g}\n"
    )
    scan_path.write_text(header + scan_path.read_text())
    bad = [c for c in scan.cells if not c.converged]
    flags = []
    if bad:
        flags.append(
            f"{len(bad)} of {len(scan.cells)} sweep cells did not converge"
        )
    best = scan.best
    lines = _summary_head(cfg) + [
        f"# n_max={cfg.n_max} steps={cfg.steps} tol={cfg.tol:.9g}"
        f" eta={cfg.eta:.9g} omega_over_gamma={cfg.omega_over_gamma:.9g}",
        f"# cells={len(scan.cells)} non_converged={len(bad)}",
        "",
        f"best cell: u = {best.u:.9g}, theta = {best.theta:.9g}",
        f"delta_x_pi2 = {best.delta_x_pi2:.9g}",
        f"r_eff_db    = {best.r_eff_db:.9g}",
        f"tail_mass   = {best.tail_mass:.3e}",
    ]
    if flags:
        lines += ["", *(f"warning: {f}" for f in flags)]
    _write_lines(out / "summary.txt", lines)
    print("\n".join(lines))
    return flags


def _run_stream_steady(cfg: ScenarioConfig, out: Path) -> list[str]:
    run = simulate_stream_reservoir(
        cfg.phi,
        cfg.theta,
        n_max=cfg.n_max,
        steps=cfg.steps,
        tol=cfg.tol,
        record_every=cfg.record_every,
    )
    stats = run.trajectory[-1]
    try:
        pred = perturbative_steady(cfg.phi, cfg.theta)
        theory = _table_row(
            "theory",
            pred.x0_mean,
            pred.xpi2_mean,
            math.pi,
            1.0 / (4.0 * pred.delta_xpi2),
            pred.delta_xpi2,
            None,
        )
        rows = [theory]
    except ValueError:
        rows = []
    rows.append(
        _table_row(
            "simulation",
            stats.mean_x0,
            stats.mean_xpi2,
            math.pi,
            math.sqrt(_variance_along(stats, 0.0)),
            math.sqrt(_variance_along(stats, math.pi / 2.0)),
            None,
        )
    )
    table = _render_table(_TABLE_HEADERS, rows)
    flags = _run_flags(run.converged, run.tail_ok)
    lines = _summary_head(cfg) + [
        f"# n_max={cfg.n_max} steps={cfg.steps} tol={cfg.tol:.9g}"
        f" phi={cfg.phi:.9g} theta={cfg.theta:.9g}",
        f"# steps_taken={run.steps_taken} converged={run.converged}"
        f" residual={run.residual:.3e} tail_mass={run.tail_mass:.3e}",
        "",
        *table,
    ]
    if flags:
        lines += ["", *(f"warning: {f}" for f in flags)]
    _write_lines(out / "summary.txt", lines)
    _write_trajectory_csv(
        out / "trajectory.csv", cfg, run.tail_mass, run.trajectory, run.steps_taken
    )
    print("\n".join(lines))
    return flags


def _formula_point(args: tuple[float, float, int, int, float]) -> tuple[float, int, bool, float]:
    """Simulate one sweep point; module level so worker pools can pickle it."""
    phi, theta, n_max, steps, tol = args
    run = simulate_stream_reservoir(
        phi, theta, n_max=n_max, steps=steps, tol=tol, record_every=0
    )
    delta = math.sqrt(float(run.trajectory[-1].var_matrix[1, 1]))
    return delta, run.steps_taken, run.converged, run.tail_mass


def _run_stream_formula(cfg: ScenarioConfig, out: Path) -> list[str]:
    grid = cfg.phi_grid if cfg.phi_grid else (cfg.phi,)
    records: list[dict[str, object]] = []
    for phi in grid:
        try:
            pred = perturbative_steady(phi, cfg.theta)
            records.append(
                {
                    "phi": phi,
                    "ok": True,
                    "x0": pred.x0_mean,
                    "delta": pred.delta_xpi2,
                    "db": squeezing_db(pred.delta_xpi2),
                }
            )
        except ValueError:
            records.append({"phi": phi, "ok": False})
    flags = []
    invalid = sum(1 for rec in records if not rec["ok"])
    if invalid:
        flags.append(f"{invalid} of {len(records)} formula points outside |phi| < pi/4")

    sim_results: dict[int, tuple[float, int, bool, float]] = {}
    if cfg.simulate:
        todo = [i for i, rec in enumerate(records) if rec["ok"]]
        args = [
            (float(records[i]["phi"]), cfg.theta, cfg.n_max, cfg.steps, cfg.tol)
            for i in todo
        ]
        if cfg.workers > 1 and len(todo) > 1:
            with multiprocessing.Pool(min(cfg.workers, len(todo))) as pool:
                outs = pool.map(_formula_point, args)
        else:
            outs = [_formula_point(a) for a in args]
        sim_results = dict(zip(todo, outs))
        if any(not r[2] for r in sim_results.values()):
            flags.append("some simulated sweep points did not converge")
        if any(r[3] > TAIL_LIMIT for r in sim_results.values()):
            flags.append(
                "some simulated sweep points exceed the truncation tail limit"
            )

    columns = "phi,x0_mean,delta_xpi2,r_eff_db,status"
    if cfg.simulate:
        columns += ",delta_sim,steps_taken,converged,tail_mass"
    lines = [
        f"# theta={cfg.theta:.9g} n_max={cfg.n_max} steps={cfg.steps} tol={cfg.tol:.9g}",
        columns,
    ]
    for i, rec in enumerate(records):
        if rec["ok"]:
            row = (
                f"{rec['phi']:.9g},{rec['x0']:.9g},{rec['delta']:.9g},"
                f"{rec['db']:.9g},ok"
            )
        else:
            row = f"{rec['phi']:.9g},nan,nan,nan,invalid"
        if cfg.simulate:
            if i in sim_results:
                delta, taken, conv, tail = sim_results[i]
                row += f",{delta:.9g},{taken},{int(conv)},{tail:.9g}"
            else:
                row += ",nan,0,0,nan"
        lines.append(row)
    _write_lines(out / "formula.csv", lines)

    valid = [rec for rec in records if rec["ok"]]
    summary = _summary_head(cfg) + [
        f"# theta={cfg.theta:.9g} n_max={cfg.n_max} points={len(records)}"
        f" invalid={invalid}",
        "",
    ]
    if valid and len(records) == 1:
        rec = valid[0]
        summary += [
            f"phi = {rec['phi']:.9g}",
            f"x0_mean = {rec['x0']:.9g}",
            f"delta_x_pi2 = {rec['delta']:.9g}",
            f"r_eff_db = {rec['db']:.9g}",
        ]
    elif valid:
        index = min(
            (i for i, rec in enumerate(records) if rec["ok"]),
            key=lambda i: records[i]["delta"],
        )
        best = records[index]
        interior = 0 < index < len(records) - 1
        summary += [
            f"minimum delta_x_pi2 = {best['delta']:.9g} at phi = {best['phi']:.9g}"
            + (" (interior)" if interior else " (grid edge)"),
            f"r_eff_db at minimum = {best['db']:.9g}",
        ]
    if flags:
        summary += ["", *(f"warning: {f}" for f in flags)]
    _write_lines(out / "summary.txt", summary)
    print("\n".join(summary))
    return flags


def _run_wigner(cfg: ScenarioConfig, out: Path) -> list[str]:
    flags: list[str] = []
    if cfg.source == "vacuum":
        rho = vacuum_state(cfg.n_max)
    elif cfg.source == "pair":
        tuning = PairTuning(
            u=cfg.u, theta=cfg.theta, mu=cfg.mu, epsilon=cfg.epsilon, chi=cfg.chi
        )
        run = simulate_pair_reservoir(
            tuning, n_max=cfg.n_max, steps=cfg.steps, tol=cfg.tol, record_every=0
        )
        rho = run.final_state
        flags += _run_flags(run.converged, run.tail_ok)
    else:
        run = simulate_stream_reservoir(
            cfg.phi, cfg.theta, n_max=cfg.n_max, steps=cfg.steps, tol=cfg.tol,
            record_every=0,
        )
        rho = run.final.rho_D
        flags += _run_flags(run.converged, run.tail_ok)
    half = cfg.half_width
    grid = wigner(
        rho, (-half, half), (-half, half), resolution=cfg.resolution
    )
    state_tail = tail_mass(rho)
    write_wigner_csv(
        grid, out / "wigner.csv", n_max=cfg.n_max, tail_mass=state_tail
    )
    stats = quad_stats(rho)
    lines = _summary_head(cfg) + [
        f"# n_max={cfg.n_max} source={cfg.source} resolution={cfg.resolution}"
        f" half_width={half:.9g} tail_mass={state_tail:.3e}",
        "",
        f"grid integral = {grid.integral():.9g}",
        f"peak |W|      = {float(np.max(np.abs(grid.values))):.9g}",
        f"delta_min     = {stats.delta_min:.9g}",
        f"delta_max     = {stats.delta_max:.9g}",
        f"r_eff_db      = {stats.r_eff_db + 0.0:.9g}",
    ]
    if flags:
        lines += ["", *(f"warning: {f}" for f in flags)]
    _write_lines(out / "summary.txt", lines)
    print("\n".join(lines))
    return flags


def _run_mps_expand(cfg: ScenarioConfig, out: Path) -> list[str]:
    amps = mps_coefficients(cfg.phi, cfg.n_qubits)
    ordered = sorted(amps.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    lines = [
        f"# phi={cfg.phi:.9g} n_qubits={cfg.n_qubits}",
        "state,re,im",
    ]
    for state, amp in ordered:
        lines.append(f"{state},{amp.real:.9g},{amp.imag:.9g}")
    _write_lines(out / "amplitudes.csv", lines)
    norm = math.fsum(abs(a) ** 2 for a in amps.values())
    summary = _summary_head(cfg) + [
        f"# phi={cfg.phi:.9g} n_qubits={cfg.n_qubits}",
        "",
        f"norm = {norm:.9g}",
        "largest amplitudes:",
    ]
    for state, amp in ordered[:8]:
        summary.append(f"  {state}  {amp.real:+.9g}{amp.imag:+.9g}j")
    _write_lines(out / "summary.txt", summary)
    print("\n".join(summary))
    return []


_RUNNERS = {
    "pair-steady": _run_pair_steady,
    "pair-tune": _run_pair_tune,
    "imperfect-sweep": _run_imperfect_sweep,
    "stream-steady": _run_stream_steady,
    "stream-formula": _run_stream_formula,
    "wigner": _run_wigner,
    "mps-expand": _run_mps_expand,
}


def run(cfg: ScenarioConfig) -> int:
    """Execute one validated scenario; returns the process exit status."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    flags = _RUNNERS[cfg.mode](cfg, out)
    if flags and cfg.strict:
        for f in flags:
            print(f"error (strict): {f}", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors raise instead of exiting."""

    def error(self, message: str) -> None:  # noqa: D401 - argparse override
        raise _UsageError(message)


class _UsageError(ValueError):
    pass


_FLAG_HELP = {
    "theta": "half-Rabi interaction angle (radians or pi fraction)",
    "u": "ground/excited balance angle of the pair",
    "mu": "phase of the doubly excited amplitude",
    "epsilon": "cross-amplitude angle of the pair",
    "chi": "phase of the cross amplitude",
    "phi": "stream entangler angle",
    "r": "target squeeze parameter",
    "phi_r": "target squeeze-axis phase",
    "alpha_re": "real part of the target displacement",
    "alpha_im": "imaginary part of the target displacement",
    "eta": "retained fraction of pair coherence (1 = none lost)",
    "omega_over_gamma": "coupling-to-decay rate ratio (inf disables decay)",
    "n_max": "oscillator truncation level",
    "steps": "maximum channel applications",
    "tol": "fixed-point residual tolerance",
    "record_every": "trajectory recording cadence (0 = final state only)",
    "u_grid": "grid of u values: comma list or start:stop:step",
    "theta_grid": "grid of theta values: comma list or start:stop:step",
    "phi_grid": "grid of phi values: comma list or start:stop:step",
    "n_qubits": "number of stream qubits to expand (2-12)",
    "source": "state to render: vacuum, pair, or stream",
    "resolution": "grid points per Wigner axis",
    "half_width": "half-width of the square Wigner window",
    "workers": "process-pool size for sweep cells",
}

_MODE_FLAGS = {
    "pair-steady": (
        "theta", "u", "mu", "epsilon", "chi", "eta", "omega_over_gamma",
        "n_max", "steps", "tol", "record_every",
    ),
    "pair-tune": ("theta", "r", "phi_r", "alpha_re", "alpha_im"),
    "imperfect-sweep": (
        "u_grid", "theta_grid", "eta", "omega_over_gamma", "n_max", "steps",
        "tol", "workers",
    ),
    "stream-steady": ("phi", "theta", "n_max", "steps", "tol", "record_every"),
    "stream-formula": (
        "phi", "phi_grid", "theta", "n_max", "steps", "tol", "workers",
    ),
    "wigner": (
        "source", "phi", "theta", "u", "mu", "epsilon", "chi", "n_max",
        "steps", "tol", "resolution", "half_width",
    ),
    "mps-expand": ("phi", "n_qubits"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="qubitbath",
        description="Reservoir-engineering scenarios for an oscillator driven "
        "by tuned or entangled qubit streams.",
    )
    sub = parser.add_subparsers(dest="mode", required=True, metavar="mode")
    for mode in MODES:
        sp = sub.add_parser(mode, help=f"run the {mode} scenario")
        for name in _MODE_FLAGS[mode]:
            sp.add_argument(
                "--" + name.replace("_", "-"),
                dest=name,
                default=None,
                help=_FLAG_HELP[name],
            )
        if mode == "stream-formula":
            sp.add_argument(
                "--simulate",
                action="store_true",
                default=None,
                help="add simulated steady points next to the formula values",
            )
        sp.add_argument(
            "--config", default=None, help="flat key = value config file"
        )
        sp.add_argument(
            "--output-dir", dest="output_dir", default=None,
            help="directory for summary and CSV outputs (default: .)",
        )
        sp.add_argument(
            "--strict",
            action="store_true",
            default=None,
            help="exit 2 on non-convergence or tail-mass breach",
        )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(args)
        file_layer: dict[str, object] = {}
        if ns.config is not None:
            file_layer = load_config_file(ns.config)
        flag_layer = {
            key: value
            for key, value in vars(ns).items()
            if key in _FIELD_KINDS and value is not None
        }
        cfg = build_config(ns.mode, file_layer, flag_layer)
        return run(cfg)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
