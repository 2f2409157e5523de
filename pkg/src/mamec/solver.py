"""PDD solver: initialization, inner BCD sweeps, outer dual/penalty loop.

One `solve` call owns its state exclusively; everything is deterministic in
the scenario and the seed. Baseline modes reuse the same machinery: `fpa`
freezes all antennas on a grid, `rma` frees only the BS side, and `local`
bypasses optimization entirely (no offloading).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import blocks
from .alcore import (RATE_SCALE, AlContext, DualState, PenaltySchedule,
                     PrimalState, al_objective, dual_or_penalty_step,
                     residuals, violation_of)
from .blocks import SCAAnchor
from .channel import AntennaLayout, jammer_channel, sinr_and_rate, uplink_channel
from .errors import ConfigError, InfeasibleRegionError
from .scenario import Scenario, Solution, delay_objective

MODES = ("full-ma", "fpa", "rma", "local")

_MODE_ALIASES = {
    "full-ma": "full-ma", "fullma": "full-ma", "ma": "full-ma",
    "fpa": "fpa",
    "rma": "rma", "receive-only-ma": "rma", "receive-ma": "rma",
    "local": "local", "local-only": "local", "local-computing": "local",
}


def parse_mode(name: str) -> str:
    try:
        return _MODE_ALIASES[name.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown mode '{name}'; expected one of {MODES}") from None


@dataclass
class SolverOptions:
    mode: str = "full-ma"
    seed: int = 0
    max_outer: int = 200
    max_inner: int = 50
    inner_tol: float = 1e-4
    eps1: float = 1e-3
    kappa0: float = 2.0
    penalty_shrink: float = 0.6
    kappa_min: float = 1e-8
    eps2_0: float = 0.1
    eps2_shrink: float = 0.7
    violation_target: float = 1e-5
    bcd_sweeps: int = 1
    scalar_cycles: int = 100
    rejection_attempts: int = 100_000

    def validate(self):
        self.mode = parse_mode(self.mode)
        if self.max_outer < 1 or self.max_inner < 1 or self.bcd_sweeps < 1:
            raise ConfigError("iteration counts must be at least 1")
        for name in ("inner_tol", "eps1", "kappa0", "eps2_0", "violation_target"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not (0 < self.penalty_shrink < 1) or not (0 < self.eps2_shrink < 1):
            raise ConfigError("shrink factors must lie in (0, 1)")

    def schedule(self) -> PenaltySchedule:
        return PenaltySchedule(kappa=self.kappa0, shrink=self.penalty_shrink,
                               kappa_min=self.kappa_min, eps2=self.eps2_0,
                               eps2_shrink=self.eps2_shrink, eps1=self.eps1)


TRACE_COLUMNS = ("outer_iter", "inner_iters_used", "al_objective", "gamma",
                 "max_delay", "violation", "kappa", "eps2")


@dataclass
class TraceRow:
    outer_iter: int
    inner_iters_used: int
    al_objective: float
    gamma: float
    max_delay: float
    violation: float
    kappa: float
    eps2: float


@dataclass
class ConvergenceTrace:
    rows: list = field(default_factory=list)

    def append(self, row: TraceRow):
        self.rows.append(row)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for r in self.rows:
                writer.writerow([r.outer_iter, r.inner_iters_used,
                                 repr(r.al_objective), repr(r.gamma),
                                 repr(r.max_delay), repr(r.violation),
                                 repr(r.kappa), repr(r.eps2)])

    @property
    def final_violation(self) -> float:
        return self.rows[-1].violation if self.rows else math.inf


# ---------------------------------------------------------------------------
# layout sampling
# ---------------------------------------------------------------------------

def _grid_layout(n: int, half: float, d_min: float, preferred: float) -> np.ndarray:
    """Centered square grid; spacing prefers `preferred` but shrinks to fit."""
    if n == 1:
        return np.zeros((1, 2))
    g = math.ceil(math.sqrt(n))
    spacing = min(preferred, 2.0 * half / (g - 1))
    if spacing < d_min - 1e-12:
        raise InfeasibleRegionError(
            f"cannot place {n} antennas at spacing {d_min} in side {2 * half}")
    coords = (np.arange(g) - (g - 1) / 2.0) * spacing
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)[:n].copy()


def _sample_layout(rng: np.random.Generator, n: int, half: float, d_min: float,
                   preferred: float, attempts: int) -> np.ndarray:
    """Random in-region layout with pairwise spacing >= d_min.

    Uses rejection sampling while the packing is loose; at tight packings
    (where rejection is hopeless) it falls back to the spacing grid shifted
    uniformly within its margins, which keeps the draw seed-deterministic.
    """
    density = n * math.pi * (d_min / 2.0) ** 2 / (2.0 * half) ** 2
    if density <= 0.3:
        pts = np.empty((n, 2))
        count, used = 0, 0
        while used < attempts:
            cand = rng.uniform(-half, half, size=2)
            used += 1
            if count == 0 or np.all(
                    np.linalg.norm(pts[:count] - cand, axis=1) >= d_min):
                pts[count] = cand
                count += 1
                if count == n:
                    return pts
        raise InfeasibleRegionError(
            f"rejection sampling failed after {attempts} attempts")
    grid = _grid_layout(n, half, d_min, preferred)
    span = np.max(grid, axis=0) - np.min(grid, axis=0)
    margin = np.maximum(0.0, half - span / 2.0)
    shift = rng.uniform(-margin, margin, size=2)
    return grid + shift


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def _initial_layout(scenario: Scenario, options: SolverOptions,
                    rng: np.random.Generator) -> AntennaLayout:
    cfg = scenario.config
    mode = options.mode
    tx_half = cfg.region_side_tx_m / 2.0
    rx_half = cfg.region_side_rx_m / 2.0
    lam_half = cfg.wavelength_m / 2.0
    move_ue = mode == "full-ma"
    move_bs = mode in ("full-ma", "rma")
    ue = np.empty((cfg.num_ues, cfg.num_ue_antennas, 2))
    for k in range(cfg.num_ues):
        if move_ue:
            ue[k] = _sample_layout(rng, cfg.num_ue_antennas, tx_half,
                                   cfg.min_spacing_m, lam_half,
                                   options.rejection_attempts)
        else:
            ue[k] = _grid_layout(cfg.num_ue_antennas, tx_half,
                                 cfg.min_spacing_m, lam_half)
    if move_bs:
        bs = _sample_layout(rng, cfg.num_bs_antennas, rx_half,
                            cfg.min_spacing_m, lam_half,
                            options.rejection_attempts)
    else:
        bs = _grid_layout(cfg.num_bs_antennas, rx_half, cfg.min_spacing_m,
                          lam_half)
    return AntennaLayout(ue, bs, cfg.bs_height_m)


def initialize(scenario: Scenario, options: SolverOptions,
               ctx: Optional[AlContext] = None):
    """Feasible starting point with every coupling satisfied exactly.

    Precoders start at full power along the dominant channel direction,
    combiners are matched filters, offloading is split evenly, and all
    auxiliaries are propagated through their defining chains so the initial
    violation is zero. Duals start at zero.
    """
    options.validate()
    if ctx is None:
        ctx = AlContext.from_scenario(scenario)
    rng = np.random.default_rng(options.seed)
    layout = _initial_layout(scenario, options, rng)
    K = ctx.num_ues

    pos_ue = layout.ue_positions
    pos_bs = layout.bs_positions
    resp_ue = np.stack([ctx.resp_ue_of(k, pos_ue[k]) for k in range(K)])
    resp_rx = ctx.resp_rx_all(pos_bs)
    resp_jam = ctx.resp_jam_of(pos_bs)

    w = np.empty((K, ctx.n_t), dtype=complex)
    f = np.empty((K, ctx.n_r), dtype=complex)
    for k in range(K):
        h = resp_rx[k].conj().T @ (ctx.sigma[k][:, None] * resp_ue[k])
        _, _, vh = np.linalg.svd(h)
        w[k] = math.sqrt(ctx.p_max[k]) * vh[0].conj()
        hw = h @ w[k]
        nrm = np.linalg.norm(hw)
        f[k] = hw / nrm if nrm > 0 else np.eye(ctx.n_r)[0]

    path_mix = np.einsum("kln,kn->kl", resp_ue, w)
    rx_mix = np.einsum("kln,kl->kn", resp_rx.conj(), ctx.sigma * path_mix)
    bf_amp = f.conj() @ rx_mix.T
    jam_rx = resp_jam.conj().T @ ctx.q_jam
    jam_amp = f.conj() @ jam_rx

    signal = np.abs(np.diag(bf_amp)) ** 2
    interf = np.sum(np.abs(bf_amp) ** 2, axis=1) - signal
    noise = np.real(np.sum(f.conj() * f, axis=1)) * ctx.sigma2
    sinr = signal / (interf + noise + np.abs(jam_amp) ** 2)
    rate = np.log2(1.0 + sinr)

    delta = np.full(K, 0.5)
    psi1 = np.full(K, ctx.psi_max / K)
    alpha1 = 0.5 * (delta ** 2 + ctx.task_bits ** 2 / psi1 ** 2)
    alpha2 = 0.5 * (delta ** 2 + ctx.task_bits ** 2 / (ctx.bw ** 2 * rate ** 2))
    local_bound = ctx.task_bits / ctx.psi_local * (1.0 - delta)
    gamma = float(np.max(np.maximum(alpha1 + alpha2, local_bound)))

    diff_ue = pos_ue[:, ctx.pairs_ue[:, 0], :] - pos_ue[:, ctx.pairs_ue[:, 1], :]
    diff_bs = pos_bs[ctx.pairs_bs[:, 0]] - pos_bs[ctx.pairs_bs[:, 1]]

    primal = PrimalState(
        gamma=gamma,
        gamma_k=np.full(K, gamma), gamma_tk=np.full(K, gamma),
        alpha1=alpha1.copy(), alpha2=alpha2.copy(),
        alpha1_t=alpha1.copy(), alpha2_t=alpha2.copy(),
        delta=delta.copy(), delta_bar=delta.copy(),
        delta_hat=delta.copy(), delta_t=delta.copy(),
        psi1=psi1.copy(), psi1_t=psi1.copy(),
        rate=rate.copy(), rate_t=rate.copy(),
        sinr=sinr.copy(), sinr_t=sinr.copy(),
        bf_amp=bf_amp, jam_amp=jam_amp,
        w=w, w_t=w.copy(), f=f, f_t=f.copy(),
        path_mix=path_mix, rx_mix=rx_mix, jam_rx=jam_rx,
        pos_ue=pos_ue.copy(), pos_bs=pos_bs.copy(),
        pair_ue=diff_ue, pair_bs=diff_bs,
        resp_ue=resp_ue, resp_rx=resp_rx, resp_jam=resp_jam,
    )
    duals = DualState.zeros_like(residuals(primal, ctx))
    return primal, duals


# ---------------------------------------------------------------------------
# inner sweep
# ---------------------------------------------------------------------------

def inner_sweep(p: PrimalState, duals: DualState, kappa: float,
                ctx: AlContext, anchor: SCAAnchor,
                move_ue: bool = True, move_bs: bool = True,
                bcd_sweeps: int = 1) -> PrimalState:
    """One full BCD pass over all sub-blocks in the flat algorithm order."""
    q = p.copy()
    q.w, q.f_t = blocks.update_precoders_and_f_aux(q, duals, kappa, ctx)
    q.resp_ue, q.resp_rx, q.resp_jam = blocks.update_response_copies(
        q, duals, kappa, ctx, bcd_sweeps)
    (q.gamma_k, q.gamma_tk, q.alpha1_t, q.alpha2_t, q.delta_bar, q.delta_hat,
     q.delta_t, q.psi1_t, q.rate_t, _) = blocks.update_timing_aux(
        q, duals, kappa, anchor, ctx)
    diff_ue = q.pos_ue[:, ctx.pairs_ue[:, 0], :] - q.pos_ue[:, ctx.pairs_ue[:, 1], :]
    q.pair_ue, _ = blocks.update_spacing_aux(
        diff_ue, duals.pair_ue, kappa, anchor.pair_dir_ue, ctx.d_min)
    diff_bs = q.pos_bs[ctx.pairs_bs[:, 0]] - q.pos_bs[ctx.pairs_bs[:, 1]]
    q.pair_bs, _ = blocks.update_spacing_aux(
        diff_bs, duals.pair_bs, kappa, anchor.pair_dir_bs, ctx.d_min)
    for k in range(ctx.num_ues):
        row, nt, u, _ = blocks.update_interference_aux(k, q, duals, kappa,
                                                       anchor, ctx)
        q.bf_amp[k] = row
        q.sinr_t[k] = nt
        q.jam_amp[k] = u
    q.gamma = blocks.update_global_delay(q.gamma_k, q.gamma_tk,
                                         duals.gamma_k, duals.gamma_tk, kappa)
    q.delta = blocks.update_offload_ratio(q.delta_bar, q.delta_hat, q.delta_t,
                                          duals.delta_bar, duals.delta_hat,
                                          duals.delta_t, kappa)
    q.alpha1, q.alpha2, q.sinr, _ = blocks.update_rate_slack(
        q, duals, kappa, anchor, ctx)
    q.psi1, _ = blocks.update_compute_alloc(q.psi1_t, duals.psi1, kappa,
                                            ctx.psi_max)
    q.f = blocks.update_receive_combiner(q, duals, kappa, ctx)
    q.path_mix = blocks.update_effective_channels(q, duals, kappa, ctx)
    q.pos_ue, q.pos_bs = blocks.update_antenna_positions(
        q, duals, kappa, ctx, move_ue, move_bs)
    q.w_t = blocks.update_precoder_aux(q, duals, kappa, ctx)
    q.rx_mix, q.jam_rx = blocks.update_mu_tilde_uj(q, duals, kappa, ctx)
    q.rate, _ = blocks.update_rate_var(q, duals, kappa, ctx)
    return q


def chain_relax(q: PrimalState, duals: DualState, kappa: float,
                ctx: AlContext, anchor: SCAAnchor, max_cycles: int):
    """Extra BCD cycles over everything except geometry, in place.

    The bare objective enters the AL only through the global delay variable,
    and its pressure reaches the physical rates through a long chain of
    couplings that plain sweeping advances O(kappa) per pass: a nearly flat
    valley the AL-change stopping rule cannot see. Cycling every cheap
    sub-block (all scalars plus the combiner/steering interface vectors; the
    response copies and antenna coordinates stay put) drives that chain to
    stationarity within one inner iteration. Each cycle repeats the same
    exact coordinate minimizations as the main sweep, so descent is
    preserved.
    """
    for _ in range(max_cycles):
        gamma_prev = q.gamma
        delta_prev = q.delta.copy()
        rate_prev = q.rate.copy()
        f_prev = q.f.copy()
        q.w, q.f_t = blocks.update_precoders_and_f_aux(q, duals, kappa, ctx)
        (q.gamma_k, q.gamma_tk, q.alpha1_t, q.alpha2_t, q.delta_bar,
         q.delta_hat, q.delta_t, q.psi1_t, q.rate_t, _) = blocks.update_timing_aux(
            q, duals, kappa, anchor, ctx)
        for k in range(ctx.num_ues):
            row, nt, u, _ = blocks.update_interference_aux(k, q, duals, kappa,
                                                           anchor, ctx)
            q.bf_amp[k] = row
            q.sinr_t[k] = nt
            q.jam_amp[k] = u
        q.gamma = blocks.update_global_delay(q.gamma_k, q.gamma_tk,
                                             duals.gamma_k, duals.gamma_tk,
                                             kappa)
        q.delta = blocks.update_offload_ratio(
            q.delta_bar, q.delta_hat, q.delta_t,
            duals.delta_bar, duals.delta_hat, duals.delta_t, kappa)
        q.alpha1, q.alpha2, q.sinr, _ = blocks.update_rate_slack(
            q, duals, kappa, anchor, ctx)
        q.psi1, _ = blocks.update_compute_alloc(q.psi1_t, duals.psi1, kappa,
                                                ctx.psi_max)
        q.f = blocks.update_receive_combiner(q, duals, kappa, ctx)
        q.path_mix = blocks.update_effective_channels(q, duals, kappa, ctx)
        q.w_t = blocks.update_precoder_aux(q, duals, kappa, ctx)
        q.rx_mix, q.jam_rx = blocks.update_mu_tilde_uj(q, duals, kappa, ctx)
        q.rate, _ = blocks.update_rate_var(q, duals, kappa, ctx)
        q.alpha1, q.delta_bar, q.psi1_t = blocks.coupled_offload_compute(
            q, duals, kappa, anchor, ctx)
        q.alpha2, q.delta_t, q.rate = blocks.coupled_offload_rate(
            q, duals, kappa, ctx)
        q.rate_t, q.sinr = blocks.coupled_rate_cap(q, duals, kappa, anchor, ctx)
        moved = max(abs(q.gamma - gamma_prev),
                    float(np.max(np.abs(q.delta - delta_prev))),
                    float(np.max(np.abs(q.rate - rate_prev))),
                    float(np.max(np.abs(q.f - f_prev))))
        if moved <= 1e-10 * max(1.0, abs(q.gamma)):
            break
    return q


# ---------------------------------------------------------------------------
# solution extraction
# ---------------------------------------------------------------------------

def _repair_spacing(pos: np.ndarray, half: float, d_min: float) -> np.ndarray:
    """Clip to the region, then nudge near-coincident pairs apart.

    Converged iterates violate spacing by at most the residual tolerance, so
    a few alternating projection steps land strictly inside the constraint.
    """
    out = np.clip(pos, -half, half)
    n = out.shape[0]
    for _ in range(500):
        worst = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                v = out[i] - out[j]
                dist = float(np.linalg.norm(v))
                deficit = d_min - dist
                if deficit > 0:
                    worst = max(worst, deficit)
                    direction = v / dist if dist > 1e-15 else np.array([1.0, 0.0])
                    push = 0.5 * deficit + 1e-12
                    out[i] = np.clip(out[i] + push * direction, -half, half)
                    out[j] = np.clip(out[j] - push * direction, -half, half)
        if worst == 0.0:
            break
    return out


def extract_solution(primal: PrimalState, scenario: Scenario, ctx: AlContext,
                     converged: bool, outer_iters: int) -> Solution:
    """Physical solution from the primal state, delays recomputed from scratch.

    Only physical variables (positions, beams, offload ratios, compute
    allocation) are read; auxiliaries never leak into the report.
    """
    cfg = scenario.config
    ue_pos = np.stack([
        _repair_spacing(primal.pos_ue[k], ctx.tx_half, ctx.d_min)
        for k in range(ctx.num_ues)])
    bs_pos = _repair_spacing(primal.pos_bs, ctx.rx_half, ctx.d_min)
    layout = AntennaLayout(ue_pos, bs_pos, cfg.bs_height_m)

    w = primal.w.copy()
    for k in range(ctx.num_ues):
        w[k] = blocks.project_to_ball(w[k], math.sqrt(ctx.p_max[k]))
    w = w * ctx.amp_p  # back to physical sqrt(mW)
    delta = np.clip(primal.delta, 0.0, 1.0)
    psi1 = primal.psi1 * RATE_SCALE
    total = float(np.sum(psi1))
    if total > scenario.tasks.mec_budget:
        psi1 *= scenario.tasks.mec_budget / total
    psi1 = np.maximum(psi1, 0.0)

    channels = [uplink_channel(layout, k, scenario.ue_paths[k],
                               scenario.rx_paths[k], cfg.wavelength_m)
                for k in range(cfg.num_ues)]
    jam = jammer_channel(layout, scenario.jam_rx_paths, scenario.jam_tx_response,
                         cfg.wavelength_m)
    _, rates = sinr_and_rate(channels, jam, w, primal.f, scenario.jam_signal,
                             cfg.noise_power_mw)
    per_ue, max_delay = delay_objective(scenario.tasks, rates, cfg.bandwidth_hz,
                                        delta, psi1)
    return Solution(layout=layout, precoders=w, combiners=primal.f.copy(),
                    offload_ratios=delta, mec_alloc=psi1, rates=rates,
                    per_ue_delay=per_ue, max_delay=max_delay,
                    converged=converged, outer_iters=outer_iters)


def _physical_max_delay(primal: PrimalState, scenario: Scenario,
                        ctx: AlContext) -> float:
    cfg = scenario.config
    layout = AntennaLayout(primal.pos_ue, primal.pos_bs, cfg.bs_height_m)
    channels = [uplink_channel(layout, k, scenario.ue_paths[k],
                               scenario.rx_paths[k], cfg.wavelength_m)
                for k in range(cfg.num_ues)]
    jam = jammer_channel(layout, scenario.jam_rx_paths, scenario.jam_tx_response,
                         cfg.wavelength_m)
    _, rates = sinr_and_rate(channels, jam, primal.w * ctx.amp_p, primal.f,
                             scenario.jam_signal, cfg.noise_power_mw)
    _, max_delay = delay_objective(scenario.tasks, rates, cfg.bandwidth_hz,
                                   np.clip(primal.delta, 0.0, 1.0),
                                   np.maximum(primal.psi1, 0.0) * RATE_SCALE)
    return max_delay


def _solve_local(scenario: Scenario, options: SolverOptions,
                 ctx: AlContext) -> tuple:
    """No offloading: every UE computes its whole task locally."""
    rng = np.random.default_rng(options.seed)
    layout = _initial_layout(scenario, options, rng)
    cfg = scenario.config
    channels = [uplink_channel(layout, k, scenario.ue_paths[k],
                               scenario.rx_paths[k], cfg.wavelength_m)
                for k in range(cfg.num_ues)]
    jam = jammer_channel(layout, scenario.jam_rx_paths, scenario.jam_tx_response,
                         cfg.wavelength_m)
    w = np.zeros((cfg.num_ues, cfg.num_ue_antennas), dtype=complex)
    f = np.zeros((cfg.num_ues, cfg.num_bs_antennas), dtype=complex)
    for k in range(cfg.num_ues):
        _, _, vh = np.linalg.svd(channels[k])
        w[k] = math.sqrt(cfg.ue_power_mw) * vh[0].conj()
        hw = channels[k] @ w[k]
        nrm = np.linalg.norm(hw)
        f[k] = hw / nrm if nrm > 0 else np.eye(cfg.num_bs_antennas)[0]
    _, rates = sinr_and_rate(channels, jam, w, f, scenario.jam_signal,
                             cfg.noise_power_mw)
    delta = np.zeros(cfg.num_ues)
    psi1 = np.full(cfg.num_ues, scenario.tasks.mec_budget / cfg.num_ues)
    per_ue, max_delay = delay_objective(scenario.tasks, rates, cfg.bandwidth_hz,
                                        delta, psi1)
    sol = Solution(layout=layout, precoders=w, combiners=f,
                   offload_ratios=delta, mec_alloc=psi1, rates=rates,
                   per_ue_delay=per_ue, max_delay=max_delay,
                   converged=True, outer_iters=0)
    return sol, ConvergenceTrace()


def solve(scenario: Scenario, options: Optional[SolverOptions] = None):
    """Run the full PDD loop; returns (Solution, ConvergenceTrace).

    Non-convergence at the outer-iteration cap is not an error: the
    lowest-violation iterate is extracted and flagged.
    """
    options = options or SolverOptions()
    options.validate()
    ctx = AlContext.from_scenario(scenario)
    if options.mode == "local":
        return _solve_local(scenario, options, ctx)
    move_ue = options.mode == "full-ma"
    move_bs = options.mode in ("full-ma", "rma")

    primal, duals = initialize(scenario, options, ctx)
    schedule = options.schedule()
    trace = ConvergenceTrace()

    best_state = primal
    best_viol = math.inf
    gamma_prev = math.inf
    converged = False
    outer_done = 0

    for outer in range(1, options.max_outer + 1):
        al_cur = al_objective(primal, duals, schedule.kappa, ctx)
        inner_used = 0
        for _ in range(options.max_inner):
            anchor = SCAAnchor.from_state(primal, ctx)
            candidate = inner_sweep(primal, duals, schedule.kappa, ctx, anchor,
                                    move_ue, move_bs, options.bcd_sweeps)
            candidate = chain_relax(candidate, duals, schedule.kappa,
                                    ctx, anchor, options.scalar_cycles)
            al_new = al_objective(candidate, duals, schedule.kappa, ctx)
            if al_new > al_cur + 1e-6 * max(1.0, abs(al_cur)):
                break  # anchor refresh stalled the descent; stop minimizing
            primal = candidate
            inner_used += 1
            if abs(al_new - al_cur) <= options.inner_tol * max(1.0, abs(al_cur)):
                al_cur = al_new
                break
            al_cur = al_new

        viol = violation_of(residuals(primal, ctx))
        trace.append(TraceRow(outer, inner_used, al_cur, float(primal.gamma),
                              _physical_max_delay(primal, scenario, ctx),
                              viol, schedule.kappa, schedule.eps2))
        outer_done = outer
        if viol <= best_viol:
            best_viol = viol
            best_state = primal
        if (abs(primal.gamma - gamma_prev) < options.eps1
                and viol < options.violation_target):
            converged = True
            break
        gamma_prev = float(primal.gamma)
        duals, schedule = dual_or_penalty_step(primal, duals, schedule, ctx)

    state = primal if converged else best_state
    solution = extract_solution(state, scenario, ctx, converged, outer_done)
    return solution, trace
