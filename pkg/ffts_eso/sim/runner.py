"""
Closed-loop scenario runner.

One run owns a plant, both FFTS-ESO observers and the optional baselines.
Noise and disturbances are tabulated up front. Each step measures, computes
the control with zero-order hold, steps the baselines with forward Euler and
advances plant and observers together with one compiled Heun step. Error,
tracking and Lyapunov columns are derived after the loop in one pass.
"""

import logging
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from .. import kernels
from ..baselines import FxtsdoState, LesoState, fxtsdo_step, leso_step
from ..control import control_law
from ..errors import NonFiniteStateError
from ..geometry import exp_so3, exp_so3_rows, rotation_angle_rows
from ..kernels import STATE_SIZE, f64
from ..models import ScenarioKind, SimConfig
from ..observer import EPS_H, lyapunov_monitor_rows, validate_gains_a, validate_gains_t
from ..plant import Measurement, NoiseSample, draw_noise_table, noise_sample, reference
from .output import emit_csv, emit_plots
from .record import SimRecord, record_columns

LOG = logging.getLogger(__name__)

# Layout of the flat closed-loop state.
EST_T = slice(18, 27)
EST_R = slice(27, 42)
ROTATION_SLICES = (slice(6, 15), slice(27, 36))
CLEAN_NOISE = (np.zeros(3), np.zeros(3), np.eye(3), np.zeros(3))


class RunSummary(BaseModel):
    """Scalar metrics of one run, as written to ``summary.json``."""

    name: str
    scenario: ScenarioKind
    noise: bool
    reject: bool
    baselines: bool
    seed: int
    h: float
    duration: float
    rows: int
    diverged: bool
    max_e_phi: float
    max_e_tau: float
    terminal_e_phi: float
    terminal_e_tau: float
    max_attitude_error: float
    mean_position_tracking_error: float
    mean_attitude_tracking_error: float
    max_orthogonality_residual: float
    leso_max_e_phi: float | None = None
    leso_max_e_tau: float | None = None
    leso_singular_steps: int | None = None
    leso_diverged: bool | None = None
    fxtsdo_max_e_phi: float | None = None
    fxtsdo_max_e_tau: float | None = None
    fxtsdo_diverged: bool | None = None


class ClosedLoop:
    """Plant plus both observers on the flat state, under held control and noise."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.body = cfg.body
        self.gains_t = cfg.translational.build()
        self.gains_r = cfg.rotational.build()
        self.f = 0.0
        self.tau = np.zeros(3)
        self.noise: NoiseSample | None = None
        self._noise = CLEAN_NOISE

    def hold(
        self,
        f: float,
        tau: np.ndarray,
        noise: NoiseSample | None = None,
        noise_rotation: np.ndarray | None = None,
    ) -> None:
        """Set the control and noise sample used over the next step.

        ``noise_rotation`` is exp(noise.R^x) when the caller already has it.
        """
        self.f, self.tau, self.noise = float(f), f64(tau), noise
        if noise is None:
            self._noise = CLEAN_NOISE
        else:
            rot = exp_so3(noise.R) if noise_rotation is None else noise_rotation
            self._noise = (f64(noise.b), f64(noise.v), f64(rot), f64(noise.Omega))

    def command(self, f: float, tau: np.ndarray) -> None:
        """Replace the held control, keeping the noise sample."""
        self.f, self.tau = float(f), f64(tau)

    def measure(self, x: np.ndarray) -> Measurement:
        b, v, R, Omega = x[0:3], x[3:6], x[6:15].reshape(3, 3), x[15:18]
        if self.noise is None:
            return Measurement(b, v, R, Omega)
        nb, nv, nR, nO = self._noise
        return Measurement(b + nb, v + nv, R @ nR, Omega + nO)

    def _constants(self):
        body = self.body
        return (body.mass, body.grav, body.J, body.J_inv,
                self.gains_t.packed, self.gains_r.packed, EPS_H)

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        phi_D, tau_D = self.cfg.disturbance.at(t)
        return kernels.closed_loop_rates(
            x, self.f, self.tau, phi_D, tau_D, *self._noise, *self._constants()
        )

    def step(self, x: np.ndarray, t: float, h: float, disturbance=None) -> np.ndarray:
        """Advance the flat state from t to t + h with one compiled Heun step.

        ``disturbance`` is ``(phi_D(t), tau_D(t), phi_D(t + h), tau_D(t + h))``;
        it is looked up from the profile when omitted.

        Raises:
            NonFiniteStateError: If the new state has a non-finite entry.
        """
        if disturbance is None:
            disturbance = (*self.cfg.disturbance.at(t), *self.cfg.disturbance.at(t + h))
        out = kernels.heun_closed_loop(
            x, h, self.f, self.tau, *disturbance, *self._noise, *self._constants()
        )
        if not np.all(np.isfinite(out)):
            raise NonFiniteStateError(t + h)
        return out


def initial_state(cfg: SimConfig) -> np.ndarray:
    """Flat closed-loop state at t = 0, observers offset from truth by ``estimate_offsets``."""
    ic, off = cfg.initial, cfg.estimate_offsets
    R = exp_so3(np.asarray(ic.attitude, dtype=float))
    Omega = np.asarray(ic.Omega, dtype=float)
    b = np.asarray(ic.position, dtype=float)
    v = np.asarray(ic.velocity, dtype=float)
    phi_D, tau_D = cfg.disturbance.at(0.0)

    E_R = exp_so3(np.asarray(off.attitude, dtype=float))
    R_hat = R @ E_R.T
    Omega_hat = E_R @ (Omega - np.asarray(off.Omega, dtype=float))
    return np.concatenate(
        [
            b,
            v,
            R.reshape(9),
            Omega,
            b - np.asarray(off.b, dtype=float),
            v - np.asarray(off.v, dtype=float),
            phi_D - np.asarray(off.phi, dtype=float),
            R_hat.reshape(9),
            Omega_hat,
            tau_D - np.asarray(off.tau, dtype=float),
        ]
    )


def _validate(cfg: SimConfig) -> None:
    report_t = validate_gains_t(cfg.translational.build())
    report_a = validate_gains_a(cfg.rotational.build())
    LOG.debug("gain certificates valid:\n%s\n%s", report_t, report_a)


def run_scenario(cfg: SimConfig) -> SimRecord:
    """Simulate one scenario and return its per-step record.

    Divergence never aborts the run: a non-finite state marks the run
    diverged and fills the remaining rows with NaN.

    Raises:
        InvalidGainsError: If either observer's gains fail their constraints.
    """
    _validate(cfg)
    started = time.perf_counter()
    h, steps, body = cfg.h, cfg.steps, cfg.body
    loop = ClosedLoop(cfg)
    times = np.arange(steps + 1) * h
    phi_tab, tau_tab = cfg.disturbance.sample(times)
    noise_tab = noise_rot = None
    if cfg.noise_enabled:
        rng = np.random.default_rng(cfg.noise.seed)
        noise_tab = draw_noise_table(cfg.noise, h, rng, steps + 1)
        noise_rot = exp_so3_rows(noise_tab[:, 6:9])

    states = np.full((steps + 1, STATE_SIZE), np.nan)
    inputs = np.full((steps + 1, 4), np.nan)
    commanded = np.full((steps + 1, 9), np.nan)
    targets = np.full((steps + 1, 3), np.nan)
    baseline_cols = np.full((steps + 1, 15), np.nan) if cfg.baselines else None
    diverged_at = steps + 1

    x = initial_state(cfg)
    leso: LesoState | None = None
    fxtsdo: FxtsdoState | None = None
    if cfg.baselines:
        leso = LesoState.initial(
            x[0:3], x[3:6], x[6:15].reshape(3, 3), x[15:18], phi_tab[0], tau_tab[0],
            body, cfg.leso,
        )
    leso_flagged = False
    zero = np.zeros(3)

    LOG.info("running %s: %d steps of %g s", cfg.run_name, steps, h)
    for k in range(steps + 1):
        t = times[k]
        if noise_tab is None:
            loop.hold(loop.f, loop.tau)
        else:
            loop.hold(loop.f, loop.tau, noise_sample(noise_tab[k]), noise_rot[k])
        meas = loop.measure(x)

        fb_phi = x[24:27] if cfg.reject else zero
        fb_tau = x[39:42] if cfg.reject else zero
        ref = reference(cfg.scenario, t)
        u = control_law(
            meas.b, meas.v, meas.R, meas.Omega, ref, fb_phi, fb_tau, body, cfg.controller
        )
        loop.command(u.f, u.tau)

        states[k] = x
        inputs[k, 0] = u.f
        inputs[k, 1:4] = u.tau
        commanded[k] = u.R_d.reshape(9)
        targets[k] = ref.b_d

        if leso is not None:
            if fxtsdo is None:
                fxtsdo = FxtsdoState.initial(meas, u.f, u.tau, phi_tab[0], tau_tab[0], body)
            else:
                fxtsdo = fxtsdo_step(fxtsdo, meas, u.f, u.tau, body, cfg.fxtsdo, h)
            baseline_cols[k] = np.concatenate(
                [
                    phi_tab[k] - leso.phi_hat(body),
                    tau_tab[k] - leso.tau_hat(body),
                    phi_tab[k] - fxtsdo.phi_hat,
                    tau_tab[k] - fxtsdo.tau_hat,
                    [leso.singular, leso.diverged, fxtsdo.diverged],
                ]
            )
            if leso.singular and not leso_flagged:
                LOG.warning("%s: LESO Euler extraction singular at t=%.3f s", cfg.run_name, t)
                leso_flagged = True
            leso = leso_step(leso, meas, u.f, u.tau, body, cfg.leso, h)

        if k == steps:
            break
        try:
            x = loop.step(
                x, t, h, (phi_tab[k], tau_tab[k], phi_tab[k + 1], tau_tab[k + 1])
            )
        except NonFiniteStateError as e:
            LOG.warning("%s: diverged at t=%.6g s", cfg.run_name, e.t)
            diverged_at = k + 1
            break

    LOG.debug("%s stepped in %.2f s", cfg.run_name, time.perf_counter() - started)
    columns = record_columns(cfg.baselines)
    data = _assemble(
        cfg, loop, times, states, inputs, commanded, targets, phi_tab, tau_tab, baseline_cols
    )
    data[diverged_at:, 1:] = np.nan
    data[diverged_at:, -1] = 1.0
    return SimRecord(
        name=cfg.run_name,
        columns=[c for c, _ in columns],
        units=[u for _, u in columns],
        data=data,
    )


def _assemble(
    cfg: SimConfig,
    loop: ClosedLoop,
    times: np.ndarray,
    states: np.ndarray,
    inputs: np.ndarray,
    commanded: np.ndarray,
    targets: np.ndarray,
    phi_tab: np.ndarray,
    tau_tab: np.ndarray,
    baseline_cols: np.ndarray | None,
) -> np.ndarray:
    """Record columns for every row at once; rows past a divergence are NaN in ``states``."""
    n = times.size
    R = states[:, 6:15].reshape(n, 3, 3)
    R_hat = states[:, 27:36].reshape(n, 3, 3)
    E_R = np.einsum("nji,njk->nik", R_hat, R)
    e_b = states[:, 0:3] - states[:, 18:21]
    e_v = states[:, 3:6] - states[:, 21:24]
    e_phi = phi_tab - states[:, 24:27]
    e_Omega = states[:, 15:18] - np.einsum("nji,nj->ni", E_R, states[:, 36:39])
    e_tau = tau_tab - states[:, 39:42]
    with np.errstate(invalid="ignore"):
        V_t, V_a = lyapunov_monitor_rows(
            e_b, e_v, e_phi, E_R, e_Omega, e_tau,
            loop.gains_t, loop.gains_r, cfg.body.mass, cfg.body.J,
        )
        scalars = np.column_stack(
            [
                rotation_angle_rows(E_R),
                np.linalg.norm(states[:, 0:3] - targets, axis=1),
                rotation_angle_rows(
                    np.einsum("nji,njk->nik", commanded.reshape(n, 3, 3), R)
                ),
                V_t,
                V_a,
            ]
        )
    blocks = [
        times[:, None], states, phi_tab, tau_tab, inputs,
        e_b, e_v, e_phi, E_R.reshape(n, 9), e_Omega, e_tau, scalars,
    ]
    if baseline_cols is not None:
        blocks.append(baseline_cols)
    blocks.append(np.zeros((n, 1)))
    return np.hstack(blocks)


def _orthogonality_rows(r: np.ndarray) -> np.ndarray:
    # orthogonality_residual per matrix
    return np.linalg.norm(np.einsum("nji,njk->nik", r, r) - np.eye(3), axis=(1, 2))


def _nanmax(x: np.ndarray) -> float:
    return float(np.nanmax(x)) if np.any(np.isfinite(x)) else float("nan")


def summarize(rec: SimRecord, cfg: SimConfig) -> RunSummary:
    """Max and terminal error norms, tracking averages and baseline metrics."""
    e_phi, e_tau = rec.norm("e_phi"), rec.norm("e_tau")
    finite = np.all(np.isfinite(rec["R"]), axis=1)
    ortho = np.concatenate(
        [_orthogonality_rows(rec[key].reshape(-1, 3, 3)[finite]) for key in ("R", "R_hat")]
    )
    summary = RunSummary(
        name=rec.name,
        scenario=cfg.scenario,
        noise=cfg.noise_enabled,
        reject=cfg.reject,
        baselines=cfg.baselines,
        seed=cfg.noise.seed,
        h=cfg.h,
        duration=cfg.duration,
        rows=rec.rows,
        diverged=bool(np.any(rec["diverged"] > 0.0)),
        max_e_phi=_nanmax(e_phi),
        max_e_tau=_nanmax(e_tau),
        terminal_e_phi=float(e_phi[-1]),
        terminal_e_tau=float(e_tau[-1]),
        max_attitude_error=_nanmax(rec["attitude_error"]),
        mean_position_tracking_error=float(np.nanmean(rec["position_tracking_error"])),
        mean_attitude_tracking_error=float(np.nanmean(rec["attitude_tracking_error"])),
        max_orthogonality_residual=float(ortho.max()) if ortho.size else float("nan"),
    )
    if "leso_e_phi" in rec:
        summary.leso_max_e_phi = _nanmax(rec.norm("leso_e_phi"))
        summary.leso_max_e_tau = _nanmax(rec.norm("leso_e_tau"))
        summary.leso_singular_steps = int(np.nansum(rec["leso_singular"]))
        summary.leso_diverged = bool(np.any(rec["leso_diverged"] > 0.0))
        summary.fxtsdo_max_e_phi = _nanmax(rec.norm("fxtsdo_e_phi"))
        summary.fxtsdo_max_e_tau = _nanmax(rec.norm("fxtsdo_e_tau"))
        summary.fxtsdo_diverged = bool(np.any(rec["fxtsdo_diverged"] > 0.0))
    return summary


def run_and_write(cfg: SimConfig, plots: bool = True) -> RunSummary:
    """Run one scenario, write ``<out>/<name>.csv`` (and ``.svg``) and summarize it."""
    rec = run_scenario(cfg)
    out = Path(cfg.out_dir)
    emit_csv(rec, out / f"{rec.name}.csv")
    if plots:
        emit_plots(rec, out / f"{rec.name}.svg")
    return summarize(rec, cfg)


def suite_configs(
    base: SimConfig,
    scenarios: Iterable[ScenarioKind] | None = None,
    noise_modes: Sequence[bool] = (False, True),
    reject_modes: Sequence[bool] | None = None,
    baseline_modes: Sequence[bool] = (False, True),
) -> list[SimConfig]:
    """Every (scenario, noise, baselines, reject) combination derived from ``base``.

    ``reject_modes`` defaults to the base setting alone.
    """
    reject_modes = (base.reject,) if reject_modes is None else reject_modes
    scenarios = tuple(ScenarioKind) if scenarios is None else tuple(scenarios)
    return [
        base.model_copy(
            update={"scenario": s, "noise_enabled": n, "baselines": b, "reject": r}
        )
        for s in scenarios
        for n in noise_modes
        for b in baseline_modes
        for r in reject_modes
    ]


def run_suite(configs: Sequence[SimConfig], jobs: int = 1, plots: bool = True) -> list[RunSummary]:
    """Run configurations serially or in a process pool; results keep input order."""
    if jobs <= 1 or len(configs) <= 1:
        return [run_and_write(cfg, plots) for cfg in configs]
    LOG.info("running %d scenarios on %d processes", len(configs), jobs)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_and_write, configs, [plots] * len(configs)))
