"""Augmented-Lagrangian core: states, residuals, violation, dual updates.

The reformulated problem decouples every nonlinear dependency through
auxiliary variables tied back by equality constraints. This module owns those
couplings: it evaluates every residual family, the infinity-norm violation
that drives the outer loop, the AL objective, and the dual-ascent /
penalty-shrink switch.

Compute-rate quantities (task bits, MEC rates, bandwidth) are rescaled by
RATE_SCALE inside the optimizer so that every residual lives on an O(1)-O(10)
numeric scale; the violation threshold of 1e-5 would be unreachable in double
precision on raw bits/s magnitudes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario

RATE_SCALE = 1e7  # bits and bits/s divided by this inside the solver


def ordered_pairs(n: int) -> np.ndarray:
    """All ordered index pairs (i, j), i != j, shape (n*(n-1), 2)."""
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    mask = i != j
    return np.stack([i[mask], j[mask]], axis=1)


@dataclass
class AlContext:
    """Constant per-scenario data consumed by AL evaluations and updates."""

    num_ues: int
    n_t: int
    n_r: int
    n_j: int
    l_ue: int
    l_jam: int
    wavelength: float
    beta: float                 # 2*pi / wavelength
    sigma: np.ndarray           # (K, L) per-link path gains
    q_jam: np.ndarray           # (L_jam,) diag(jam gains) @ A_tx @ z
    dir_ue: np.ndarray          # (K, L, 2) transmit path directions
    dir_rx: np.ndarray          # (K, L, 2) receive path directions per link
    off_rx: np.ndarray          # (K, L) receive height phase offsets, meters
    dir_jam: np.ndarray         # (L_jam, 2)
    off_jam: np.ndarray         # (L_jam,)
    pairs_ue: np.ndarray        # (P_t, 2) ordered antenna pairs, UE side
    pairs_bs: np.ndarray        # (P_r, 2)
    task_bits: np.ndarray       # (K,) scaled
    psi_local: np.ndarray       # (K,) scaled
    psi_max: float              # scaled
    bw: float                   # scaled
    p_max: np.ndarray           # (K,) solver units
    sigma2: float               # noise power, solver units
    d_min: float
    tx_half: float
    rx_half: float
    amp_p: float                # sqrt(mW) per solver precoder unit

    def __post_init__(self):
        # per-antenna views of the ordered-pair lists, used by position solves
        self.pair_first_ue = [np.where(self.pairs_ue[:, 0] == n)[0]
                              for n in range(self.n_t)]
        self.pair_second_ue = [np.where(self.pairs_ue[:, 1] == n)[0]
                               for n in range(self.n_t)]
        self.pair_first_bs = [np.where(self.pairs_bs[:, 0] == n)[0]
                              for n in range(self.n_r)]
        self.pair_second_bs = [np.where(self.pairs_bs[:, 1] == n)[0]
                               for n in range(self.n_r)]
        self.dir_bs_stack = np.concatenate([self.dir_rx.reshape(-1, 2),
                                            self.dir_jam], axis=0)
        self.off_bs_stack = np.concatenate([self.off_rx.reshape(-1),
                                            self.off_jam])

    @classmethod
    def from_scenario(cls, s: Scenario) -> "AlContext":
        """Build the solver-unit view of a scenario.

        Two normalizations keep every coupling residual on a comparable
        numeric scale (the AL weighs all couplings equally, so orders of
        magnitude of spread would leave the small ones unenforced):
        compute-rate quantities are divided by RATE_SCALE, and the amplitude
        chain is divided by the expected link amplitude (channel gains by the
        root link power, precoders by the root power budget, noise and the
        jamming excitation accordingly). SINRs, rates and delays are exactly
        invariant under both.
        """
        cfg = s.config
        beta = 2.0 * np.pi / cfg.wavelength_m
        amp_h = float(np.sqrt(cfg.ref_gain
                              * np.mean(s.ue_distances) ** (-cfg.pathloss_exponent)))
        amp_p = float(np.sqrt(cfg.ue_power_mw))
        sigma = np.stack([p.gains for p in s.ue_paths]) / amp_h
        dir_ue = np.stack([p.directions() for p in s.ue_paths])
        dir_rx = np.stack([p.directions() for p in s.rx_paths])
        off_rx = np.stack([p.height_phase(cfg.bs_height_m) for p in s.rx_paths])
        dir_jam = s.jam_rx_paths.directions()
        off_jam = s.jam_rx_paths.height_phase(cfg.bs_height_m)
        q_jam = s.jam_rx_paths.gains * (s.jam_tx_response @ s.jam_signal) \
            / (amp_h * amp_p)
        k = cfg.num_ues
        return cls(
            num_ues=k, n_t=cfg.num_ue_antennas, n_r=cfg.num_bs_antennas,
            n_j=cfg.num_jammer_antennas, l_ue=cfg.num_paths, l_jam=cfg.num_jammer_paths,
            wavelength=cfg.wavelength_m, beta=beta, sigma=sigma, q_jam=q_jam,
            dir_ue=dir_ue, dir_rx=dir_rx, off_rx=off_rx,
            dir_jam=dir_jam, off_jam=off_jam,
            pairs_ue=ordered_pairs(cfg.num_ue_antennas),
            pairs_bs=ordered_pairs(cfg.num_bs_antennas),
            task_bits=np.full(k, s.tasks.task_bits / RATE_SCALE),
            psi_local=np.full(k, s.tasks.local_rate / RATE_SCALE),
            psi_max=s.tasks.mec_budget / RATE_SCALE,
            bw=cfg.bandwidth_hz / RATE_SCALE,
            p_max=np.full(k, cfg.ue_power_mw / amp_p ** 2),
            sigma2=cfg.noise_power_mw / (amp_h * amp_p) ** 2,
            d_min=cfg.min_spacing_m,
            tx_half=cfg.region_side_tx_m / 2.0,
            rx_half=cfg.region_side_rx_m / 2.0,
            amp_p=amp_p,
        )

    # -- array-response builders -------------------------------------------
    def resp_ue_of(self, k: int, pos: np.ndarray) -> np.ndarray:
        """Transmit response of UE k's array at coordinates `pos` (N_t, 2)."""
        return np.exp(1j * self.beta * (self.dir_ue[k] @ pos.T))

    def resp_rx_of(self, k: int, bs_pos: np.ndarray) -> np.ndarray:
        """Receive response of the BS array on UE-k's paths."""
        phase = self.dir_rx[k] @ bs_pos.T + self.off_rx[k][:, None]
        return np.exp(1j * self.beta * phase)

    def resp_jam_of(self, bs_pos: np.ndarray) -> np.ndarray:
        phase = self.dir_jam @ bs_pos.T + self.off_jam[:, None]
        return np.exp(1j * self.beta * phase)

    def resp_rx_all(self, bs_pos: np.ndarray) -> np.ndarray:
        """(K, L, N_r) stack of per-link receive responses."""
        phase = self.dir_rx @ bs_pos.T + self.off_rx[:, :, None]
        return np.exp(1j * self.beta * phase)


@dataclass
class PrimalState:
    """Every optimization variable of the decoupled problem.

    Naming: *_t fields are the tilde copies tied to their partner by an
    equality coupling; `bf_amp[k, k']` is the beamformed amplitude of UE k'
    seen by combiner k; `jam_amp` / `jam_rx` are the jammer terms after / at
    the combiner; `path_mix` / `rx_mix` are the per-path transmit mix and the
    received steering vector of each link; `resp_*` are the unit-modulus
    copies of the array-response matrices.
    """

    gamma: float
    gamma_k: np.ndarray       # (K,)
    gamma_tk: np.ndarray      # (K,)
    alpha1: np.ndarray        # (K,)
    alpha2: np.ndarray
    alpha1_t: np.ndarray
    alpha2_t: np.ndarray
    delta: np.ndarray
    delta_bar: np.ndarray
    delta_hat: np.ndarray
    delta_t: np.ndarray
    psi1: np.ndarray
    psi1_t: np.ndarray
    rate: np.ndarray          # Gamma_k, bits/s/Hz
    rate_t: np.ndarray
    sinr: np.ndarray          # nu_k
    sinr_t: np.ndarray
    bf_amp: np.ndarray        # (K, K) complex
    jam_amp: np.ndarray       # (K,) complex
    w: np.ndarray             # (K, N_t) complex
    w_t: np.ndarray
    f: np.ndarray             # (K, N_r) complex
    f_t: np.ndarray
    path_mix: np.ndarray      # (K, L) complex
    rx_mix: np.ndarray        # (K, N_r) complex
    jam_rx: np.ndarray        # (N_r,) complex
    pos_ue: np.ndarray        # (K, N_t, 2)
    pos_bs: np.ndarray        # (N_r, 2)
    pair_ue: np.ndarray       # (K, P_t, 2)
    pair_bs: np.ndarray       # (P_r, 2)
    resp_ue: np.ndarray       # (K, L, N_t) complex, unit modulus
    resp_rx: np.ndarray       # (K, L, N_r) complex
    resp_jam: np.ndarray      # (L_jam, N_r) complex

    def copy(self) -> "PrimalState":
        vals = {}
        for fld in dataclasses.fields(self):
            v = getattr(self, fld.name)
            vals[fld.name] = v.copy() if isinstance(v, np.ndarray) else v
        return PrimalState(**vals)


@dataclass
class Residuals:
    """One entry per equality coupling; field names match DualState."""

    gamma_k: np.ndarray
    gamma_tk: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    delta_bar: np.ndarray
    delta_hat: np.ndarray
    delta_t: np.ndarray
    psi1: np.ndarray
    rate: np.ndarray
    sinr: np.ndarray
    bf_amp: np.ndarray
    jam_amp: np.ndarray
    w: np.ndarray
    f: np.ndarray
    path_mix: np.ndarray
    rx_mix: np.ndarray
    jam_rx: np.ndarray
    pair_ue: np.ndarray
    pair_bs: np.ndarray
    resp_ue: np.ndarray
    resp_rx: np.ndarray
    resp_jam: np.ndarray


@dataclass
class DualState:
    """Lagrange multipliers, one per residual family, matching shapes."""

    gamma_k: np.ndarray
    gamma_tk: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    delta_bar: np.ndarray
    delta_hat: np.ndarray
    delta_t: np.ndarray
    psi1: np.ndarray
    rate: np.ndarray
    sinr: np.ndarray
    bf_amp: np.ndarray
    jam_amp: np.ndarray
    w: np.ndarray
    f: np.ndarray
    path_mix: np.ndarray
    rx_mix: np.ndarray
    jam_rx: np.ndarray
    pair_ue: np.ndarray
    pair_bs: np.ndarray
    resp_ue: np.ndarray
    resp_rx: np.ndarray
    resp_jam: np.ndarray

    @classmethod
    def zeros_like(cls, r: Residuals) -> "DualState":
        vals = {f.name: np.zeros_like(getattr(r, f.name))
                for f in dataclasses.fields(r)}
        return cls(**vals)

    def copy(self) -> "DualState":
        vals = {f.name: getattr(self, f.name).copy()
                for f in dataclasses.fields(self)}
        return DualState(**vals)


@dataclass
class PenaltySchedule:
    """Penalty parameter and the violation/tolerance schedule of the outer loop."""

    kappa: float = 2.0
    shrink: float = 0.6
    kappa_min: float = 1e-8
    eps2: float = 0.1
    eps2_shrink: float = 0.7
    eps1: float = 1e-3

    def validate(self):
        if not (0.0 < self.shrink < 1.0):
            raise ValueError("penalty shrink factor must lie in (0, 1)")
        if self.kappa < self.kappa_min or self.kappa_min <= 0:
            raise ValueError("kappa must be at least kappa_min > 0")
        if not (0.0 < self.eps2_shrink < 1.0) or self.eps2 <= 0 or self.eps1 <= 0:
            raise ValueError("tolerances must be positive; eps2 shrink in (0, 1)")


def residuals(p: PrimalState, ctx: AlContext) -> Residuals:
    """Evaluate every coupling residual at the current primal state."""
    sig_mu = ctx.sigma * p.path_mix
    rx_mix_target = np.einsum("kln,kl->kn", p.resp_rx.conj(), sig_mu)
    return Residuals(
        gamma_k=p.gamma - p.gamma_k,
        gamma_tk=p.gamma - p.gamma_tk,
        alpha1=p.alpha1 - p.alpha1_t,
        alpha2=p.alpha2 - p.alpha2_t,
        delta_bar=p.delta - p.delta_bar,
        delta_hat=p.delta - p.delta_hat,
        delta_t=p.delta - p.delta_t,
        psi1=p.psi1 - p.psi1_t,
        rate=p.rate - p.rate_t,
        sinr=p.sinr - p.sinr_t,
        bf_amp=p.bf_amp - p.f.conj() @ p.rx_mix.T,
        jam_amp=p.jam_amp - p.f.conj() @ p.jam_rx,
        w=p.w - p.w_t,
        f=p.f - p.f_t,
        path_mix=p.path_mix - np.einsum("kln,kn->kl", p.resp_ue, p.w_t),
        rx_mix=p.rx_mix - rx_mix_target,
        jam_rx=p.jam_rx - p.resp_jam.conj().T @ ctx.q_jam,
        pair_ue=p.pair_ue - (p.pos_ue[:, ctx.pairs_ue[:, 0], :]
                             - p.pos_ue[:, ctx.pairs_ue[:, 1], :]),
        pair_bs=p.pair_bs - (p.pos_bs[ctx.pairs_bs[:, 0]]
                             - p.pos_bs[ctx.pairs_bs[:, 1]]),
        resp_ue=np.stack([ctx.resp_ue_of(k, p.pos_ue[k]) for k in range(ctx.num_ues)])
        - p.resp_ue,
        resp_rx=ctx.resp_rx_all(p.pos_bs) - p.resp_rx,
        resp_jam=ctx.resp_jam_of(p.pos_bs) - p.resp_jam,
    )


def violation_of(r: Residuals) -> float:
    """Infinity norm over every residual entry."""
    worst = 0.0
    for fld in dataclasses.fields(r):
        v = getattr(r, fld.name)
        if v.size:
            worst = max(worst, float(np.max(np.abs(v))))
    return worst


def violation(p: PrimalState, ctx: AlContext) -> float:
    return violation_of(residuals(p, ctx))


def al_objective(p: PrimalState, duals: DualState, kappa: float,
                 ctx: AlContext) -> float:
    """gamma + 1/(2*kappa) * sum over couplings of | r + kappa*lambda |^2."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    r = residuals(p, ctx)
    total = 0.0
    for fld in dataclasses.fields(r):
        shifted = getattr(r, fld.name) + kappa * getattr(duals, fld.name)
        total += float(np.sum(np.abs(shifted) ** 2))
    return float(p.gamma) + total / (2.0 * kappa)


def dual_or_penalty_step(p: PrimalState, duals: DualState,
                         schedule: PenaltySchedule, ctx: AlContext):
    """Outer-loop switch: dual ascent on low violation, else penalty shrink.

    Returns updated (duals, schedule); inputs are not mutated.
    """
    schedule.validate()
    r = residuals(p, ctx)
    v = violation_of(r)
    new_schedule = dataclasses.replace(schedule)
    if v <= schedule.eps2:
        new_duals = duals.copy()
        inv_k = 1.0 / schedule.kappa
        for fld in dataclasses.fields(r):
            getattr(new_duals, fld.name)[...] += inv_k * getattr(r, fld.name)
        new_schedule.eps2 = schedule.eps2 * schedule.eps2_shrink
        return new_duals, new_schedule
    new_schedule.kappa = max(schedule.shrink * schedule.kappa, schedule.kappa_min)
    return duals, new_schedule
