"""Imperfection models for the pair reservoir and the squeezing optimizer.

Two degradations matter in practice: photon loss of the oscillator between
interactions, and loss of coherence inside each qubit pair before it arrives.
The first is a standard two-operator damping map kept to first order in
gamma*t; the second replaces the pure pair by a partially dephased mixture
whose off-diagonal block is scaled by a retention factor eta.

For small theta the degraded reservoir admits closed-form steady second
moments, which bound what any simulation can reach.  The optimizer runs the
exact channel over a (u, theta) grid with both degradations switched on and
returns the cell of strongest squeezing, refining once around it.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .channels import KrausMap, completeness_defect
from .fock_space import DEFAULT_N_MAX, DensityMatrix, FockOperator, annihilation_op
from .observables import squeezing_db
from .pair_reservoir import simulate_pair_reservoir

__all__ = [
    "DECAY_GUARD",
    "ImperfectionConfig",
    "ScanCell",
    "SqueezingScan",
    "decay_kraus",
    "dephased_pair",
    "moment_steady",
    "optimize_squeezing",
    "write_scan_csv",
]

# First-order validity guard for the damping map.
DECAY_GUARD = 0.05


@dataclass(frozen=True)
class ImperfectionConfig:
    """Imperfection strengths for a reservoir study.

    ``eta`` is the retained fraction of the pair's gg/ee coherence;
    ``omega_over_gamma`` the ratio of the qubit-oscillator coupling rate to
    the oscillator energy-decay rate (may be ``inf`` to disable decay).
    ``theta`` and ``u`` hold the operating point for single-point studies;
    grid sweeps supply their own values per cell.
    """

    eta: float
    omega_over_gamma: float
    theta: float
    u: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if math.isnan(self.omega_over_gamma) or self.omega_over_gamma <= 0.0:
            raise ValueError(
                f"omega_over_gamma must be positive, got {self.omega_over_gamma}"
            )
        if not (math.isfinite(self.theta) and self.theta > 0.0):
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not math.isfinite(self.u):
            raise ValueError("u must be finite")

    def decay_per_pair(self, theta: float | None = None) -> float:
        """Photon-loss strength gamma*t accumulated over one pair transit.

        The transit time of a pair at half-Rabi angle theta is taken as
        theta divided by the coupling rate, so gamma*t = theta/(omega/gamma).
        """
        th = self.theta if theta is None else theta
        return th / self.omega_over_gamma


def decay_kraus(gamma_tr: float, n_max: int = DEFAULT_N_MAX) -> KrausMap:
    """First-order photon-loss map over a transit: M0 = I - (gamma t/2) N, M1 = sqrt(gamma t) a.

    Intentionally not trace-preserving: sum M^dag M = I + (gamma t/2)^2 N^2, a
    defect of order (gamma t)^2 n_max^2 that is recorded on the full space.
    Drivers renormalize after application.
    """
    if not 0.0 <= gamma_tr < DECAY_GUARD:
        raise ValueError(
            f"gamma*t must lie in [0, {DECAY_GUARD}) for the first-order map, "
            f"got {gamma_tr}"
        )
    dim = n_max + 1
    a = annihilation_op(n_max).entries
    m0 = np.eye(dim, dtype=complex) - 0.5 * gamma_tr * np.diag(
        np.arange(dim, dtype=float)
    )
    m1 = math.sqrt(gamma_tr) * a
    return KrausMap(
        ops=(FockOperator(dim, m0), FockOperator(dim, m1)),
        completeness_defect=completeness_defect([m0, m1]),
    )


def dephased_pair(beta_gg: complex, beta_ee: complex, eta: float) -> DensityMatrix:
    """Pair state with the gg/ee coherence scaled by the retention factor eta.

    At eta = 1 this is the pure state beta_gg|gg> + beta_ee|ee>; at eta = 0 a
    classical diagonal mixture.  Positive semi-definite for any eta in [0, 1]
    since the off-diagonal block is a contraction of the rank-one case.
    """
    bgg, bee = complex(beta_gg), complex(beta_ee)
    norm = abs(bgg) ** 2 + abs(bee) ** 2
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"|beta_gg|^2 + |beta_ee|^2 = {norm!r}, expected 1")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = abs(bgg) ** 2
    m[3, 3] = abs(bee) ** 2
    m[3, 0] = eta * np.conj(bgg) * bee
    m[0, 3] = eta * np.conj(bee) * bgg
    return DensityMatrix(4, m)


def moment_steady(u: float, eta: float) -> tuple[float, float]:
    """Steady second moments (⟨X_0²⟩, ⟨X_{π/2}²⟩) of the degraded small-theta model.

    Closed form ((1 ± eta sin 2u)/(4 cos 2u)); independent of theta.  Raises
    when cos 2u ≤ 0, where the moments grow without bound instead of settling.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    c2u = math.cos(2.0 * u)
    if c2u <= 1e-12:
        raise ValueError(
            f"cos 2u = {c2u} is not positive: the second moments diverge"
        )
    s = eta * math.sin(2.0 * u)
    return (1.0 + s) / (4.0 * c2u), (1.0 - s) / (4.0 * c2u)


@dataclass(frozen=True)
class ScanCell:
    """One grid cell of a squeezing scan (one row of the CSV table)."""

    u: float
    theta: float
    delta_x_pi2: float
    r_eff_db: float
    converged: bool
    tail_mass: float


@dataclass(frozen=True)
class SqueezingScan:
    """Scan result: the best cell and every evaluated cell in evaluation order."""

    best: ScanCell
    cells: tuple[ScanCell, ...]


def _scan_cell(args: tuple[float, float, float, float, int, int, float]) -> ScanCell:
    """Evaluate one (u, theta) cell; module level so worker pools can pickle it."""
    u, theta, eta, gamma, n_max, steps, tol = args
    run = simulate_pair_reservoir(
        dephased_pair(math.cos(u), math.sin(u), eta),
        theta,
        n_max=n_max,
        steps=steps,
        decay=gamma if gamma > 0.0 else None,
        tol=tol,
        record_every=0,
    )
    delta = math.sqrt(float(run.trajectory[-1].var_matrix[1, 1]))
    return ScanCell(
        u=u,
        theta=theta,
        delta_x_pi2=delta,
        r_eff_db=squeezing_db(delta),
        converged=run.converged,
        tail_mass=run.tail_mass,
    )


def optimize_squeezing(
    cfg: ImperfectionConfig,
    u_grid: Sequence[float],
    theta_grid: Sequence[float],
    n_max: int = DEFAULT_N_MAX,
    *,
    steps: int = 80_000,
    tol: float = 1e-7,
    workers: int = 1,
) -> SqueezingScan:
    """Exhaustive (u, theta) scan of steady squeezing under decay and dephasing.

    Every cell simulates the exact channel built from the dephased pair (with
    the cell's u, epsilon = 0) interleaved with one decay step per pair, and
    records the steady standard deviation of X_{pi/2}.  After the coarse scan
    a single refinement pass evaluates a quarter-spacing neighbourhood around
    the best cell, clamped to the grid hull (the grid defines the search
    domain; refinement interpolates, never extrapolates).  Non-convergence
    and tail-mass flags are propagated per cell, not raised.

    ``workers`` > 1 evaluates independent cells in a process pool; results are
    merged in grid order, so the scan table is identical for any pool size.
    """
    u_vals = sorted(float(v) for v in u_grid)
    t_vals = sorted(float(v) for v in theta_grid)
    if not u_vals or not t_vals:
        raise ValueError("u_grid and theta_grid must be non-empty")
    if any(abs(v) >= math.pi / 4.0 for v in u_vals):
        raise ValueError("every u in the grid must satisfy |u| < pi/4")
    if any(v <= 0.0 for v in t_vals):
        raise ValueError("every theta in the grid must be positive")
    if workers < 1:
        raise ValueError("workers must be a positive integer")

    evaluated: dict[tuple[float, float], ScanCell] = {}

    def ensure(pairs: list[tuple[float, float]]) -> None:
        todo = [p for p in pairs if p not in evaluated]
        if not todo:
            return
        args = [
            (u, t, cfg.eta, cfg.decay_per_pair(t), n_max, steps, tol)
            for (u, t) in todo
        ]
        if workers > 1 and len(todo) > 1:
            with multiprocessing.Pool(min(workers, len(todo))) as pool:
                results = pool.map(_scan_cell, args)
        else:
            results = [_scan_cell(a) for a in args]
        evaluated.update(zip(todo, results))

    ensure([(u, t) for u in u_vals for t in t_vals])
    best = min(
        (evaluated[(u, t)] for u in u_vals for t in t_vals),
        key=lambda c: c.delta_x_pi2,
    )

    def refined_axis(values: list[float], center: float) -> list[float]:
        if len(values) < 2:
            return [center]
        i = values.index(center)
        gaps = []
        if i > 0:
            gaps.append(values[i] - values[i - 1])
        if i < len(values) - 1:
            gaps.append(values[i + 1] - values[i])
        step = min(gaps) / 4.0
        lo, hi = values[0], values[-1]
        return sorted(
            {min(max(center + k * step, lo), hi) for k in (-1, 0, 1)}
        )

    fine_u = refined_axis(u_vals, best.u)
    fine_t = refined_axis(t_vals, best.theta)
    ensure([(u, t) for u in fine_u for t in fine_t])
    for u in fine_u:
        for t in fine_t:
            candidate = evaluated[(u, t)]
            if candidate.delta_x_pi2 < best.delta_x_pi2:
                best = candidate

    return SqueezingScan(best=best, cells=tuple(evaluated.values()))


def write_scan_csv(scan: SqueezingScan, path: str | Path) -> None:
    """Write the scan table as CSV (9 significant digits, converged as 0/1)."""
    lines = ["u,theta,delta_x_pi2,r_eff_db,converged,tail_mass"]
    for c in scan.cells:
        lines.append(
            f"{c.u:.9g},{c.theta:.9g},{c.delta_x_pi2:.9g},"
            f"{c.r_eff_db:.9g},{int(c.converged)},{c.tail_mass:.9g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
