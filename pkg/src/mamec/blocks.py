"""Closed-form minimizers for every coordinate sub-block of the AL problem.

Each function exactly minimizes the augmented-Lagrangian objective restricted
to its own variables, subject to that sub-block's (convexified) constraints,
and returns any Lagrange multipliers it introduced so callers can certify
nonnegativity and complementary slackness. Scalar multiplier searches use
bracketed bisection; everything else is a projection or a small linear solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alcore import AlContext, DualState, PrimalState
from .errors import NumericFailure

LN2 = float(np.log(2.0))
SINR_ANCHOR_FLOOR = 1e-9
PSI_ANCHOR_FLOOR = 1e-6
BISECT_DOUBLINGS = 60
BISECT_TOL = 1e-10


@dataclass
class SCAAnchor:
    """Previous-iterate values that pin the convexified constraints.

    Anchors are clamped away from zero where a linearization divides by them;
    spacing anchors are stored as unit directions (only the direction enters
    the supporting-hyperplane constraint).
    """

    nu0: np.ndarray        # (K,) sinr linearization point, >= 0
    nu_t0: np.ndarray      # (K,) sinr_t anchor, > 0
    u_kk0: np.ndarray      # (K,) complex, desired-signal amplitude anchor
    psi1_t0: np.ndarray    # (K,) > 0
    pair_dir_ue: np.ndarray  # (K, P_t, 2) unit vectors
    pair_dir_bs: np.ndarray  # (P_r, 2)

    @classmethod
    def from_state(cls, p: PrimalState, ctx: AlContext) -> "SCAAnchor":
        diff_ue = p.pos_ue[:, ctx.pairs_ue[:, 0], :] - p.pos_ue[:, ctx.pairs_ue[:, 1], :]
        diff_bs = p.pos_bs[ctx.pairs_bs[:, 0]] - p.pos_bs[ctx.pairs_bs[:, 1]]
        return cls(
            nu0=np.maximum(p.sinr, 0.0),
            nu_t0=np.maximum(p.sinr_t, SINR_ANCHOR_FLOOR),
            u_kk0=np.diag(p.bf_amp).copy(),
            psi1_t0=np.maximum(p.psi1_t, PSI_ANCHOR_FLOOR),
            pair_dir_ue=_safe_units(p.pair_ue, diff_ue),
            pair_dir_bs=_safe_units(p.pair_bs, diff_bs),
        )


def _safe_units(vecs: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Normalize, falling back to the physical difference (then e_x) near zero."""
    out = vecs.copy()
    norms = np.linalg.norm(out, axis=-1, keepdims=True)
    bad = norms[..., 0] < 1e-12
    out[bad] = fallback[bad]
    norms = np.linalg.norm(out, axis=-1, keepdims=True)
    bad = norms[..., 0] < 1e-12
    out[bad] = np.array([1.0, 0.0])
    norms = np.linalg.norm(out, axis=-1, keepdims=True)
    return out / norms


# ---------------------------------------------------------------------------
# elementary projections
# ---------------------------------------------------------------------------

def project_to_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the origin-centered ball of given radius."""
    if radius == np.inf:
        return v.copy()
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = float(np.linalg.norm(v))
    if n <= radius:
        return v.copy()
    return v * (radius / n)


def update_unit_modulus(D: np.ndarray, C: np.ndarray, B_init: np.ndarray,
                        sweeps: int = 1) -> np.ndarray:
    """Cyclic entry-wise minimization of tr(B^H B D) - 2 Re tr(B^H C).

    Every entry stays unit modulus; each entry update is the exact scalar
    minimizer, so the objective never increases. Zero numerators keep the
    previous entry.
    """
    B = np.array(B_init, dtype=complex)
    rows, cols = B.shape
    d_diag = np.real(np.diag(D))
    for _ in range(sweeps):
        for i in range(rows):
            for j in range(cols):
                q = B[i] @ D[:, j] - B[i, j] * d_diag[j]
                z = C[i, j] - q
                mag = abs(z)
                if mag > 0.0:
                    B[i, j] = z / mag
    return B


# ---------------------------------------------------------------------------
# Block 1, sub-block 3: timing/offloading auxiliaries
# ---------------------------------------------------------------------------

def _bisect_decreasing(h, hi0: float, what: str) -> float:
    """Root of a strictly decreasing scalar function with h(0) > 0."""
    hi = hi0
    for _ in range(BISECT_DOUBLINGS):
        if h(hi) <= 0.0:
            break
        hi *= 2.0
    else:
        raise NumericFailure(what, "multiplier bracket not found")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = h(mid)
        if abs(val) <= BISECT_TOL:
            return mid
        if val > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _offload_bound_multiplier(c_d: float, c_p: float, g: float, rhs: float,
                              what: str) -> float:
    """Root of (c_d/(1+m))^2 - g*(c_p + m*g/2) - rhs, inlined for speed."""
    if c_d * c_d - g * c_p - rhs <= 0.0:
        return 0.0
    hi = 1.0
    ok = False
    for _ in range(BISECT_DOUBLINGS):
        v = (c_d / (1.0 + hi)) ** 2 - g * (c_p + 0.5 * hi * g) - rhs
        if v <= 0.0:
            ok = True
            break
        hi *= 2.0
    if not ok:
        raise NumericFailure(what, "multiplier bracket not found")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v = (c_d / (1.0 + mid)) ** 2 - g * (c_p + 0.5 * mid * g) - rhs
        if abs(v) <= BISECT_TOL:
            return mid
        if v > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def update_timing_aux(p: PrimalState, duals: DualState, kappa: float,
                      anchor: SCAAnchor, ctx: AlContext):
    """Joint update of the per-UE delay/offload auxiliaries.

    The subproblem separates into five constrained groups per UE; each is
    solved at its KKT point. Returns the nine updated arrays plus the (K, 5)
    multiplier matrix.
    """
    K = ctx.num_ues
    k_ = kappa
    a_gk = p.gamma + k_ * duals.gamma_k
    a_gt = p.gamma + k_ * duals.gamma_tk
    a_a1 = p.alpha1 + k_ * duals.alpha1
    a_a2 = p.alpha2 + k_ * duals.alpha2
    a_db = p.delta + k_ * duals.delta_bar
    a_dh = p.delta + k_ * duals.delta_hat
    a_dt = p.delta + k_ * duals.delta_t
    a_ps = p.psi1 + k_ * duals.psi1
    a_gm = p.rate + k_ * duals.rate

    mults = np.zeros((K, 5))

    # group 1: gamma_k vs alpha-sum (linear constraint, closed form)
    m1 = np.maximum(0.0, 2.0 * (a_a1 + a_a2 - a_gk) / 3.0)
    gamma_k = a_gk + m1 / 2.0
    alpha1_t = a_a1 - m1 / 2.0
    alpha2_t = a_a2 - m1 / 2.0
    mults[:, 0] = m1

    # group 2: (delta_bar, psi1_t) under the linearized offload-compute bound
    delta_bar = np.empty(K)
    psi1_t = np.empty(K)
    for k in range(K):
        psi0 = float(anchor.psi1_t0[k])
        bits2 = float(ctx.task_bits[k]) ** 2
        c0 = bits2 / psi0 ** 2
        g = 2.0 * bits2 / psi0 ** 3
        rhs = 2.0 * float(p.alpha1[k]) - c0 - g * psi0
        adb, aps = float(a_db[k]), float(a_ps[k])
        m2 = _offload_bound_multiplier(adb, aps, g, rhs, "timing-aux")
        delta_bar[k] = adb / (1.0 + m2)
        psi1_t[k] = aps + 0.5 * m2 * g
        mults[k, 1] = m2

    # group 3: delta_t under the rate-side quadratic bound (1-D projection)
    bound = 2.0 * p.alpha2 - ctx.task_bits ** 2 / (ctx.bw ** 2 * p.rate ** 2)
    if np.any(bound <= 0.0) or not np.all(np.isfinite(bound)):
        raise NumericFailure("timing-aux", "rate slack non-positive for delta_t")
    root = np.sqrt(bound)
    m3 = np.maximum(0.0, np.abs(a_dt) / root - 1.0)
    delta_t = a_dt / (1.0 + m3)
    mults[:, 2] = m3

    # group 4: (gamma_tk, delta_hat) under the linear local-computing bound
    r_loc = ctx.task_bits / ctx.psi_local
    slack0 = r_loc * (1.0 - a_dh) - a_gt
    m4 = np.where(slack0 > 0.0, 2.0 * slack0 / (r_loc ** 2 + 1.0), 0.0)
    gamma_tk = a_gt + m4 / 2.0
    delta_hat = a_dh + m4 * r_loc / 2.0
    mults[:, 3] = m4

    # group 5: rate_t under the linearized log-rate cap (1-D projection)
    r0 = np.log2(1.0 + anchor.nu0)
    s0 = 1.0 / (2.0 * LN2 * (1.0 + anchor.nu0))
    cap = r0 + s0 * (p.sinr - anchor.nu0)
    m5 = np.maximum(0.0, 2.0 * (a_gm - cap))
    rate_t = np.minimum(a_gm, cap)
    mults[:, 4] = m5

    return (gamma_k, gamma_tk, alpha1_t, alpha2_t, delta_bar, delta_hat,
            delta_t, psi1_t, rate_t, mults)


# ---------------------------------------------------------------------------
# Block 1, sub-block 4: spacing auxiliaries
# ---------------------------------------------------------------------------

def update_spacing_aux(pair_diffs: np.ndarray, lam: np.ndarray, kappa: float,
                       anchor_dirs: np.ndarray, d_min: float):
    """Project each proximal center onto the half-plane (dir . x) >= d.

    `pair_diffs` are the physical position differences; the supporting
    hyperplane at the previous iterate replaces the nonconvex ring constraint
    ||x|| >= d. Returns the new auxiliaries and one multiplier per pair.
    """
    center = pair_diffs - kappa * lam
    dots = np.sum(center * anchor_dirs, axis=-1)
    gap = np.maximum(0.0, d_min - dots)
    out = center + gap[..., None] * anchor_dirs
    return out, 2.0 * gap


# ---------------------------------------------------------------------------
# Block 1, sub-block 5: interference/SINR auxiliaries
# ---------------------------------------------------------------------------

def update_interference_aux(k: int, p: PrimalState, duals: DualState,
                            kappa: float, anchor: SCAAnchor, ctx: AlContext):
    """Update (bf_amp row k, sinr_t[k], jam_amp[k]) at a KKT point.

    The convexified SINR constraint either is slack at zero multiplier or is
    driven to equality by a bisection on the scalar slackness function, which
    collapses to a/(1+m)^2 + c - d*m for precomputed coefficients.
    """
    f_k = p.f[k]
    c_row = p.rx_mix @ f_k.conj() - kappa * duals.bf_amp[k]
    c_u = complex(np.vdot(f_k, p.jam_rx)) - kappa * duals.jam_amp[k]
    a_nu = float(p.sinr[k] + kappa * duals.sinr[k])
    const = float(np.vdot(p.f_t[k], p.f_t[k]).real) * ctx.sigma2
    u0 = complex(anchor.u_kk0[k])
    nt0 = float(anchor.nu_t0[k])
    c_kk = complex(c_row[k])
    u0_sq = abs(u0) ** 2

    a_coef = float(np.sum(np.abs(c_row) ** 2)) - abs(c_kk) ** 2 + abs(c_u) ** 2
    c_coef = const - 2.0 * (u0.conjugate() * c_kk).real / nt0 \
        + u0_sq * a_nu / nt0 ** 2
    d_coef = 2.0 * u0_sq / nt0 ** 2 + u0_sq ** 2 / (2.0 * nt0 ** 4)

    def slackness(m):
        return a_coef / (1.0 + m) ** 2 + c_coef - d_coef * m

    if slackness(0.0) <= 0.0:
        m6 = 0.0
    else:
        if d_coef <= 0.0:
            raise NumericFailure("interference-aux",
                                 "degenerate anchor: slackness cannot reach zero")
        m6 = _bisect_decreasing(slackness, 1.0, "interference-aux")
    row = c_row / (1.0 + m6)
    row[k] = c_kk + m6 * u0 / nt0
    nu_t = a_nu - m6 * u0_sq / (2.0 * nt0 ** 2)
    return row, float(nu_t), c_u / (1.0 + m6), m6


# ---------------------------------------------------------------------------
# Block 2 scalars
# ---------------------------------------------------------------------------

def update_global_delay(gamma_k, gamma_tk, lam_gk, lam_gtk, kappa: float) -> float:
    """Stationary point of the AL restricted to the global delay variable.

    Includes the bare objective's unit gradient, which is the only downward
    pressure on the delay in the whole scheme.
    """
    K = len(gamma_k)
    total = np.sum(gamma_k - kappa * lam_gk) + np.sum(gamma_tk - kappa * lam_gtk)
    return float((total - kappa) / (2.0 * K))


def update_offload_ratio(delta_bar, delta_hat, delta_t, lam_db, lam_dh, lam_dt,
                         kappa: float) -> np.ndarray:
    """Mean of the three proximal centers, clamped to [0, 1]."""
    m = ((delta_bar - kappa * lam_db) + (delta_hat - kappa * lam_dh)
         + (delta_t - kappa * lam_dt)) / 3.0
    return np.clip(m, 0.0, 1.0)


def update_rate_slack(p: PrimalState, duals: DualState, kappa: float,
                      anchor: SCAAnchor, ctx: AlContext):
    """Lower-bound projections for (alpha1, alpha2, nu) with multipliers."""
    q1 = 0.5 * (p.delta_bar ** 2 + ctx.task_bits ** 2 / p.psi1_t ** 2)
    q2 = 0.5 * (p.delta_t ** 2 + ctx.task_bits ** 2 / (ctx.bw ** 2 * p.rate ** 2))
    r0 = np.log2(1.0 + anchor.nu0)
    s0 = 1.0 / (2.0 * LN2 * (1.0 + anchor.nu0))
    q3 = anchor.nu0 + (p.rate_t - r0) / s0

    c1 = p.alpha1_t - kappa * duals.alpha1
    c2 = p.alpha2_t - kappa * duals.alpha2
    c3 = p.sinr_t - kappa * duals.sinr
    alpha1 = np.maximum(c1, q1)
    alpha2 = np.maximum(c2, q2)
    nu = np.maximum(c3, q3)
    mults = np.stack([2.0 * np.maximum(0.0, q1 - c1),
                      2.0 * np.maximum(0.0, q2 - c2),
                      2.0 * np.maximum(0.0, q3 - c3) / s0], axis=1)
    return alpha1, alpha2, nu, mults


def update_compute_alloc(psi1_t, lam_psi1, kappa: float, psi_max: float):
    """Uniform-shift projection of the centers onto the budget half-space."""
    c = psi1_t - kappa * lam_psi1
    K = len(c)
    m10 = max(0.0, 2.0 * (float(np.sum(c)) - psi_max) / K)
    return c - m10 / 2.0, m10


def update_receive_combiner(p: PrimalState, duals: DualState, kappa: float,
                            ctx: AlContext):
    """Linear solve for every combiner over its full set of AL couplings.

    f_k appears in its consensus term, the jammer-amplitude coupling, and
    every beamformed-amplitude coupling of row k, giving
    (I + u u^H + sum_k' m_k' m_k'^H) f = a + s* u + sum_k' c* m_k'.
    """
    u = p.jam_rx
    gram = np.eye(ctx.n_r, dtype=complex) + np.outer(u, u.conj()) \
        + p.rx_mix.T @ p.rx_mix.conj()
    a = p.f_t - kappa * duals.f
    s = p.jam_amp + kappa * duals.jam_amp
    c = p.bf_amp + kappa * duals.bf_amp
    rhs = a + s.conj()[:, None] * u[None, :] + c.conj() @ p.rx_mix
    return np.linalg.solve(gram, rhs.T).T


def update_effective_channels(p: PrimalState, duals: DualState, kappa: float,
                              ctx: AlContext) -> np.ndarray:
    """Normal-equation solve for each per-path transmit mix vector."""
    out = np.empty_like(p.path_mix)
    eye = np.eye(ctx.l_ue)
    for k in range(ctx.num_ues):
        a = p.resp_ue[k] @ p.w_t[k] - kappa * duals.path_mix[k]
        m = p.resp_rx[k].conj().T * ctx.sigma[k][None, :]
        b = p.rx_mix[k] + kappa * duals.rx_mix[k]
        out[k] = np.linalg.solve(eye + m.conj().T @ m, a + m.conj().T @ b)
    return out


def update_precoder_aux(p: PrimalState, duals: DualState, kappa: float,
                        ctx: AlContext) -> np.ndarray:
    """Normal-equation solve for every precoder auxiliary."""
    out = np.empty_like(p.w_t)
    eye = np.eye(ctx.n_t)
    for k in range(ctx.num_ues):
        b_k = p.resp_ue[k]
        rhs = b_k.conj().T @ (p.path_mix[k] + kappa * duals.path_mix[k]) \
            + (p.w[k] + kappa * duals.w[k])
        out[k] = np.linalg.solve(eye + b_k.conj().T @ b_k, rhs)
    return out


def update_mu_tilde_uj(p: PrimalState, duals: DualState, kappa: float,
                       ctx: AlContext):
    """Joint solve for the received steering vectors and the jam vector.

    All K+1 systems share the Gram matrix I + sum_k f_k f_k^H, so it is
    factored once.
    """
    gram = np.eye(ctx.n_r, dtype=complex) + p.f.T @ p.f.conj()
    rhs = np.empty((ctx.n_r, ctx.num_ues + 1), dtype=complex)
    for kp in range(ctx.num_ues):
        b = p.resp_rx[kp].conj().T @ (ctx.sigma[kp] * p.path_mix[kp]) \
            - kappa * duals.rx_mix[kp]
        c = p.bf_amp[:, kp] + kappa * duals.bf_amp[:, kp]
        rhs[:, kp] = b + c @ p.f
    b_j = p.resp_jam.conj().T @ ctx.q_jam - kappa * duals.jam_rx
    s = p.jam_amp + kappa * duals.jam_amp
    rhs[:, ctx.num_ues] = b_j + s @ p.f
    sol = np.linalg.solve(gram, rhs)
    return sol[:, :ctx.num_ues].T.copy(), sol[:, ctx.num_ues].copy()


def update_rate_var(p: PrimalState, duals: DualState, kappa: float,
                    ctx: AlContext):
    """Projection of the rate variable onto its SCA lower bound."""
    slack = 2.0 * p.alpha2 - p.delta_t ** 2
    if np.any(slack <= 0.0):
        raise NumericFailure("rate-var", "2*alpha2 <= delta_t^2")
    gmin = ctx.task_bits / (ctx.bw * np.sqrt(slack))
    c = p.rate_t - kappa * duals.rate
    rate = np.maximum(c, gmin)
    return rate, 2.0 * np.maximum(0.0, gmin - c)


# ---------------------------------------------------------------------------
# coupled scalar solves
#
# Several variable pairs pin each other on a shared constraint curve (for
# example alpha2 = max(center, bound(Gamma)) while Gamma = max(center,
# bound(alpha2))): one-variable-at-a-time descent cannot move along the curve
# even though the joint move strictly improves the AL. These exact joint
# minimizers break those deadlocks; the solver's relaxation loop runs them in
# addition to the per-block updates.
# ---------------------------------------------------------------------------

def coupled_offload_compute(p: PrimalState, duals: DualState, kappa: float,
                            anchor: SCAAnchor, ctx: AlContext):
    """Joint (alpha1, delta_bar, psi1_t) under the linearized compute bound."""
    alpha1 = np.empty(ctx.num_ues)
    delta_bar = np.empty(ctx.num_ues)
    psi1_t = np.empty(ctx.num_ues)
    for k in range(ctx.num_ues):
        c_a = p.alpha1_t[k] - kappa * duals.alpha1[k]
        c_d = p.delta[k] + kappa * duals.delta_bar[k]
        c_p = p.psi1[k] + kappa * duals.psi1[k]
        psi0 = anchor.psi1_t0[k]
        c0 = ctx.task_bits[k] ** 2 / psi0 ** 2
        g = 2.0 * ctx.task_bits[k] ** 2 / psi0 ** 3

        def h(m, c_a=c_a, c_d=c_d, c_p=c_p, c0=c0, g=g, psi0=psi0):
            return ((c_d / (1.0 + m)) ** 2 + c0 - g * (c_p + 0.5 * m * g - psi0)
                    - 2.0 * (c_a + m))

        m = 0.0 if h(0.0) <= 0.0 else _bisect_decreasing(h, 1.0, "offload-compute")
        alpha1[k] = c_a + m
        delta_bar[k] = c_d / (1.0 + m)
        psi1_t[k] = c_p + 0.5 * m * g
    return alpha1, delta_bar, psi1_t


def coupled_offload_rate(p: PrimalState, duals: DualState, kappa: float,
                         ctx: AlContext):
    """Joint (alpha2, delta_t, rate) under the offload-transmit bound.

    KKT stationarity gives the multiplier in closed form as a function of the
    rate, m(G) = G^3 (G - c_g) / w^2, so the slackness condition reduces to a
    single bisection over the rate variable.
    """
    alpha2 = np.empty(ctx.num_ues)
    delta_t = np.empty(ctx.num_ues)
    rate = np.empty(ctx.num_ues)
    for k in range(ctx.num_ues):
        c_a = float(p.alpha2_t[k] - kappa * duals.alpha2[k])
        c_d = float(p.delta[k] + kappa * duals.delta_t[k])
        c_g = float(p.rate_t[k] - kappa * duals.rate[k])
        w2 = float(ctx.task_bits[k] / ctx.bw) ** 2

        if c_g > 0.0 and c_d ** 2 + w2 / c_g ** 2 - 2.0 * c_a <= 0.0:
            alpha2[k], delta_t[k], rate[k] = c_a, c_d, c_g
            continue

        def slack_of_rate(g, c_a=c_a, c_d=c_d, c_g=c_g, w2=w2):
            m = g ** 3 * (g - c_g) / w2
            return (c_d / (1.0 + m)) ** 2 + w2 / g ** 2 - 2.0 * (c_a + m)

        lo = max(c_g, 0.0)
        hi = max(lo, 1e-6) * 2.0 + 1.0
        for _ in range(BISECT_DOUBLINGS):
            if slack_of_rate(hi) <= 0.0:
                break
            hi *= 2.0
        else:
            raise NumericFailure("offload-rate", "rate bracket not found")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            val = slack_of_rate(mid)
            if abs(val) <= BISECT_TOL:
                lo = hi = mid
                break
            if val > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
        g = 0.5 * (lo + hi)
        m = g ** 3 * (g - c_g) / w2
        alpha2[k] = c_a + m
        delta_t[k] = c_d / (1.0 + m)
        rate[k] = g
    return alpha2, delta_t, rate


def coupled_rate_cap(p: PrimalState, duals: DualState, kappa: float,
                     anchor: SCAAnchor, ctx: AlContext):
    """Joint (rate_t, sinr) under the linearized log-rate cap (half-plane)."""
    c_t = p.rate + kappa * duals.rate
    c_n = p.sinr_t - kappa * duals.sinr
    r0 = np.log2(1.0 + anchor.nu0)
    s0 = 1.0 / (2.0 * LN2 * (1.0 + anchor.nu0))
    b = r0 - s0 * anchor.nu0
    m = np.maximum(0.0, 2.0 * (c_t - s0 * c_n - b) / (1.0 + s0 ** 2))
    return c_t - m / 2.0, c_n + m * s0 / 2.0


# ---------------------------------------------------------------------------
# Block 2, sub-block 7: antenna positions
# ---------------------------------------------------------------------------

def _unwrap_targets(raw: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Shift each principal-branch angle to the 2*pi branch nearest `current`."""
    return raw + 2.0 * np.pi * np.round((current - raw) / (2.0 * np.pi))


def _update_array_positions(pos, dirs, offs, targets_cplx, pair_first,
                            pair_second, pairs, pair_aux, pair_lam, kappa,
                            beta, half):
    """Gauss-Seidel pass over one array's antennas with a monotone safeguard.

    `targets_cplx` is the (L_total, N) stack of dual-shifted response targets
    whose phases this array chases. Phase targets are unwrapped to the branch
    nearest the current coordinate, the 2x2 stationarity system is solved
    exactly over the box (edge solves when the free minimizer leaves it), and
    a candidate that would increase the exact AL restriction (wrapped phases
    can defeat the quadratic surrogate) is rejected.
    """
    pos = pos.copy()
    n_ant = pos.shape[0]
    gram = beta ** 2 * dirs.T @ dirs
    shifted_pairs = pair_aux + kappa * pair_lam
    for n in range(n_ant):
        first_idx = pair_first[n]
        second_idx = pair_second[n]
        t_col = targets_cplx[:, n]
        raw = np.angle(t_col)
        cur_phase = beta * (dirs @ pos[n] + offs)
        targets = _unwrap_targets(raw, cur_phase)

        n_other = len(first_idx) + len(second_idx)
        m00 = gram[0, 0] + n_other
        m01 = gram[0, 1]
        m11 = gram[1, 1] + n_other
        resid = targets - beta * offs
        rhs = beta * (dirs.T @ resid)
        c_first = shifted_pairs[first_idx] + pos[pairs[first_idx, 1]]
        c_second = pos[pairs[second_idx, 0]] - shifted_pairs[second_idx]
        rhs = rhs + c_first.sum(axis=0) + c_second.sum(axis=0)

        def j_quad(pt):
            ph = beta * (dirs @ pt + offs) - targets
            val = float(ph @ ph)
            d1 = c_first - pt
            d2 = pt - c_second
            return val + float(np.sum(d1 * d1)) + float(np.sum(d2 * d2))

        det = m00 * m11 - m01 * m01
        cand = np.array([(m11 * rhs[0] - m01 * rhs[1]) / det,
                         (m00 * rhs[1] - m01 * rhs[0]) / det])
        if np.max(np.abs(cand)) > half + 1e-15:
            # constrained minimum lies on the boundary: four edge solves
            best, best_val = None, np.inf
            for axis, bound in ((0, -half), (0, half), (1, -half), (1, half)):
                free = 1 - axis
                mf = m11 if free else m00
                t = (rhs[free] - m01 * bound) / mf
                t = min(half, max(-half, t))
                pt = np.empty(2)
                pt[axis] = bound
                pt[free] = t
                val = j_quad(pt)
                if val < best_val:
                    best, best_val = pt, val
            cand = best

        def al_terms(pt):
            resp = np.exp(1j * beta * (dirs @ pt + offs))
            val = float(np.sum(np.abs(resp - t_col) ** 2))
            d1 = c_first - pt
            d2 = pt - c_second
            return val + float(np.sum(d1 * d1)) + float(np.sum(d2 * d2))

        before = al_terms(pos[n])
        if al_terms(cand) <= before + 1e-12 * (1.0 + abs(before)):
            pos[n] = cand
    return pos


def update_antenna_positions(p: PrimalState, duals: DualState, kappa: float,
                             ctx: AlContext, move_ue: bool = True,
                             move_bs: bool = True):
    """Update all movable coordinates; frozen sides pass through unchanged."""
    pos_ue = p.pos_ue.copy()
    if move_ue:
        zero_off = np.zeros(ctx.l_ue)
        for k in range(ctx.num_ues):
            targets = p.resp_ue[k] - kappa * duals.resp_ue[k]
            pos_ue[k] = _update_array_positions(
                p.pos_ue[k], ctx.dir_ue[k], zero_off, targets,
                ctx.pair_first_ue, ctx.pair_second_ue, ctx.pairs_ue,
                p.pair_ue[k], duals.pair_ue[k], kappa, ctx.beta, ctx.tx_half)
    pos_bs = p.pos_bs
    if move_bs:
        targets = np.concatenate(
            [(p.resp_rx[k] - kappa * duals.resp_rx[k]) for k in range(ctx.num_ues)]
            + [p.resp_jam - kappa * duals.resp_jam], axis=0)
        pos_bs = _update_array_positions(
            p.pos_bs, ctx.dir_bs_stack, ctx.off_bs_stack, targets,
            ctx.pair_first_bs, ctx.pair_second_bs, ctx.pairs_bs,
            p.pair_bs, duals.pair_bs, kappa, ctx.beta, ctx.rx_half)
    return pos_ue, pos_bs


# ---------------------------------------------------------------------------
# Block 1, sub-blocks 1-2 drivers (thin wrappers used by the sweep)
# ---------------------------------------------------------------------------

def update_precoders_and_f_aux(p: PrimalState, duals: DualState, kappa: float,
                               ctx: AlContext):
    """w_k: ball projection at radius sqrt(P_k); f_t: SINR-ball projection.

    The combiner auxiliary enters the convexified SINR constraint through its
    noise term, so its sub-block is a projection onto the ball that keeps the
    constraint satisfied at the current auxiliaries (leaving it unconstrained
    lets other sub-blocks go infeasible and breaks monotone descent). When
    even a zero f_t could not restore feasibility the center is kept.
    """
    w = np.empty_like(p.w)
    for k in range(ctx.num_ues):
        w[k] = project_to_ball(p.w_t[k] - kappa * duals.w[k],
                               float(np.sqrt(ctx.p_max[k])))
    f_t = p.f + kappa * duals.f
    nu_t = np.maximum(p.sinr_t, SINR_ANCHOR_FLOOR)
    u_kk = np.diag(p.bf_amp)
    off = np.sum(np.abs(p.bf_amp) ** 2, axis=1) - np.abs(u_kk) ** 2
    slack = np.abs(u_kk) ** 2 / nu_t - off - np.abs(p.jam_amp) ** 2
    for k in range(ctx.num_ues):
        if slack[k] <= 0.0:
            continue
        f_t[k] = project_to_ball(f_t[k], math.sqrt(slack[k] / ctx.sigma2))
    return w, f_t


def update_response_copies(p: PrimalState, duals: DualState, kappa: float,
                           ctx: AlContext, sweeps: int = 1):
    """One BCD pass over each unit-modulus response copy.

    The receive-side and jammer copies are updated in Hermitian-transposed
    coordinates, where their subproblems take the same canonical quadratic
    form as the transmit copies.
    """
    resp_ue = np.empty_like(p.resp_ue)
    for k in range(ctx.num_ues):
        w_t = p.w_t[k]
        d = np.outer(w_t, w_t.conj()) + np.eye(ctx.n_t)
        target = p.path_mix[k] + kappa * duals.path_mix[k]
        c = np.outer(target, w_t.conj()) \
            + ctx.resp_ue_of(k, p.pos_ue[k]) + kappa * duals.resp_ue[k]
        resp_ue[k] = update_unit_modulus(d, c, p.resp_ue[k], sweeps)

    resp_rx = np.empty_like(p.resp_rx)
    rx_all = ctx.resp_rx_all(p.pos_bs)
    for k in range(ctx.num_ues):
        s = ctx.sigma[k] * p.path_mix[k]
        d = np.outer(s, s.conj()) + np.eye(ctx.l_ue)
        b = p.rx_mix[k] + kappa * duals.rx_mix[k]
        g = rx_all[k] + kappa * duals.resp_rx[k]
        c = np.outer(b, s.conj()) + g.conj().T
        x = update_unit_modulus(d, c, p.resp_rx[k].conj().T, sweeps)
        resp_rx[k] = x.conj().T

    q = ctx.q_jam
    d = np.outer(q, q.conj()) + np.eye(ctx.l_jam)
    b = p.jam_rx + kappa * duals.jam_rx
    g = ctx.resp_jam_of(p.pos_bs) + kappa * duals.resp_jam
    c = np.outer(b, q.conj()) + g.conj().T
    x = update_unit_modulus(d, c, p.resp_jam.conj().T, sweeps)
    resp_jam = x.conj().T
    return resp_ue, resp_rx, resp_jam
