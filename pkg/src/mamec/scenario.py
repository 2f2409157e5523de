"""Problem instances: system parameters, tasks, random scenarios, delay metric.

Units are fixed across the package: powers in mW (linear), bandwidth in Hz,
task sizes in bits, compute rates in bits/s, coordinates and wavelength in
meters, angles in radians. Helpers convert from the dBm figures quoted in
configuration files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .channel import AntennaLayout, PathSet, field_response_matrix
from .errors import ConfigError

DEFAULT_WAVELENGTH = 0.1  # 3 GHz carrier
DEFAULT_UE_RING_M = 60.0
DEFAULT_JAM_RING_M = 30.0


def dbm_to_mw(x: float) -> float:
    """10^(x/10): dBm to linear milliwatts."""
    return 10.0 ** (x / 10.0)


def mw_to_dbm(x: float) -> float:
    if x <= 0:
        raise ConfigError("power must be positive to express in dBm")
    return 10.0 * math.log10(x)


@dataclass
class SystemConfig:
    """Static system parameters of one problem instance.

    Defaults reproduce the reference setup used throughout the experiment
    suite: 2 UEs with 4 movable antennas each, a 16-antenna BS, a 2-antenna
    jammer, 20 dBm UE power and 5 dBm jammer power.
    """

    num_ues: int = 2
    num_ue_antennas: int = 4
    num_bs_antennas: int = 16
    num_jammer_antennas: int = 2
    num_paths: int = 2
    num_jammer_paths: int = 8
    ue_power_mw: float = dbm_to_mw(20.0)
    jammer_power_mw: float = dbm_to_mw(5.0)
    noise_power_mw: float = 1e-5
    bandwidth_hz: float = 50e6
    wavelength_m: float = DEFAULT_WAVELENGTH
    region_side_tx_m: float = 2.0 * DEFAULT_WAVELENGTH
    region_side_rx_m: float = 2.0 * DEFAULT_WAVELENGTH
    min_spacing_m: float = DEFAULT_WAVELENGTH / 4.0
    bs_height_m: float = 10.0
    pathloss_exponent: float = 2.8
    ref_gain: float = 1e-4

    def validate(self) -> None:
        counts = (self.num_ues, self.num_ue_antennas, self.num_bs_antennas,
                  self.num_jammer_antennas, self.num_paths, self.num_jammer_paths)
        if any(int(c) != c or c < 1 for c in counts):
            raise ConfigError("all counts must be positive integers")
        positives = (self.ue_power_mw, self.jammer_power_mw, self.noise_power_mw,
                     self.bandwidth_hz, self.wavelength_m, self.region_side_tx_m,
                     self.region_side_rx_m, self.min_spacing_m, self.pathloss_exponent,
                     self.ref_gain)
        if any(p <= 0 for p in positives):
            raise ConfigError("powers, bandwidth, geometry and gains must be positive")
        if self.min_spacing_m >= self.region_side_tx_m:
            raise ConfigError("min spacing must be smaller than the UE region side")
        if self.min_spacing_m >= self.region_side_rx_m:
            raise ConfigError("min spacing must be smaller than the BS region side")
        # A square grid at the minimum spacing must fit inside each region,
        # otherwise no layout can satisfy the pairwise-distance constraint.
        for n, side, name in ((self.num_ue_antennas, self.region_side_tx_m, "UE"),
                              (self.num_bs_antennas, self.region_side_rx_m, "BS")):
            g = math.ceil(math.sqrt(n))
            if (g - 1) * self.min_spacing_m > side + 1e-12:
                raise ConfigError(
                    f"{name} region side {side} m cannot hold {n} antennas "
                    f"at spacing {self.min_spacing_m} m")


@dataclass
class TaskProfile:
    """Computation workload: task size, MEC budget, local compute rate."""

    task_bits: float = 1e7
    mec_budget: float = 1e8
    local_rate: float = 0.4e7

    def validate(self) -> None:
        if self.task_bits <= 0 or self.mec_budget <= 0 or self.local_rate <= 0:
            raise ConfigError("task bits, MEC budget and local rate must be positive")


@dataclass
class ConstraintViolation:
    """One violated solution constraint: what, where, by how much."""

    kind: str
    index: tuple
    amount: float

    def __str__(self):
        return f"{self.kind}{self.index}: exceeds tolerance by {self.amount:.3e}"


@dataclass
class Scenario:
    """Immutable problem instance: geometry, gains, powers, tasks, jamming."""

    config: SystemConfig
    tasks: TaskProfile
    ue_paths: list
    rx_paths: list
    jam_rx_paths: PathSet
    jam_tx_response: np.ndarray
    jam_signal: np.ndarray
    ue_distances: np.ndarray
    jam_distance: float
    rng_seed: int


@dataclass
class Solution:
    """Physical variables of a solved instance plus the resulting delays."""

    layout: AntennaLayout
    precoders: np.ndarray
    combiners: np.ndarray
    offload_ratios: np.ndarray
    mec_alloc: np.ndarray
    rates: np.ndarray
    per_ue_delay: np.ndarray
    max_delay: float
    converged: bool = True
    outer_iters: int = 0


def _draw_angles(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.0, np.pi, size=n)


def _draw_gains(rng: np.random.Generator, n: int, power: float) -> np.ndarray:
    s = math.sqrt(power / n / 2.0)
    g = rng.normal(0.0, s, size=(n, 2))
    return g[:, 0] + 1j * g[:, 1]


def _jammer_tx_array(config: SystemConfig, elev: np.ndarray, azim: np.ndarray) -> np.ndarray:
    """Fixed transmit response of the jammer: uniform linear array, lambda/2."""
    n = config.num_jammer_antennas
    lam = config.wavelength_m
    x = (np.arange(n) - (n - 1) / 2.0) * lam / 2.0
    pos = np.stack([x, np.zeros(n)], axis=1)
    paths = PathSet(elev, azim, np.ones(len(elev), dtype=complex))
    return field_response_matrix(pos, 0.0, paths, lam)


def generate_scenario(config: SystemConfig, tasks: TaskProfile, seed: int,
                      ue_ring_radius_m: float = DEFAULT_UE_RING_M,
                      jam_ring_radius_m: float = DEFAULT_JAM_RING_M) -> Scenario:
    """Draw one Monte-Carlo instance, deterministic in `seed`.

    UEs sit on a ring of fixed radius around the BS (the jammer on its own
    ring); all path angles are independent uniform on [0, pi]; per-path gains
    are complex Gaussian with total expected power g0 * distance^-alpha per
    link. The jamming signal has exactly the configured power.
    """
    config.validate()
    tasks.validate()
    rng = np.random.default_rng(seed)
    k_total = config.num_ues
    l_ue, l_jam = config.num_paths, config.num_jammer_paths

    ue_distances = np.full(k_total, float(ue_ring_radius_m))
    ue_paths, rx_paths = [], []
    for k in range(k_total):
        link_power = config.ref_gain * ue_distances[k] ** (-config.pathloss_exponent)
        ue_paths.append(PathSet(_draw_angles(rng, l_ue), _draw_angles(rng, l_ue),
                                _draw_gains(rng, l_ue, link_power)))
        rx_paths.append(PathSet(_draw_angles(rng, l_ue), _draw_angles(rng, l_ue),
                                np.ones(l_ue, dtype=complex)))

    jam_power_gain = config.ref_gain * float(jam_ring_radius_m) ** (-config.pathloss_exponent)
    jam_rx = PathSet(_draw_angles(rng, l_jam), _draw_angles(rng, l_jam),
                     _draw_gains(rng, l_jam, jam_power_gain))
    jam_tx = _jammer_tx_array(config, _draw_angles(rng, l_jam), _draw_angles(rng, l_jam))

    g = rng.normal(size=(config.num_jammer_antennas, 2))
    u = g[:, 0] + 1j * g[:, 1]
    z = math.sqrt(config.jammer_power_mw) * u / np.linalg.norm(u)

    return Scenario(config=config, tasks=tasks, ue_paths=ue_paths, rx_paths=rx_paths,
                    jam_rx_paths=jam_rx, jam_tx_response=jam_tx, jam_signal=z,
                    ue_distances=ue_distances, jam_distance=float(jam_ring_radius_m),
                    rng_seed=int(seed))


def delay_objective(tasks: TaskProfile, rates, bandwidth: float, offload_ratios,
                    mec_alloc):
    """Per-UE and worst-case delay in seconds.

    Offload branch: delta * bits * (1/psi1 + 1/(B*rate)); local branch:
    (1-delta) * bits / psi2. A UE's delay is the larger branch. Degenerate
    offloading (delta > 0 with zero compute or zero rate) yields +inf, which
    keeps sweep pipelines total instead of raising.
    """
    rates = np.asarray(rates, dtype=float)
    delta = np.asarray(offload_ratios, dtype=float)
    psi1 = np.asarray(mec_alloc, dtype=float)
    bits = tasks.task_bits
    local = (1.0 - delta) * bits / tasks.local_rate
    offload = np.zeros_like(local)
    active = delta > 0
    with np.errstate(divide="ignore"):
        inv_psi = np.where(psi1 > 0, 1.0 / np.where(psi1 > 0, psi1, 1.0), np.inf)
        link = bandwidth * rates
        inv_link = np.where(link > 0, 1.0 / np.where(link > 0, link, 1.0), np.inf)
    offload[active] = (delta * bits * (inv_psi + inv_link))[active]
    per_ue = np.maximum(offload, local)
    return per_ue, float(np.max(per_ue))


POWER_TOL = 1e-9
SPACING_TOL = 1e-9
BUDGET_TOL = 1e-6
REGION_TOL = 1e-9
RATIO_TOL = 1e-9


def validate_solution(scenario: Scenario, solution: Solution):
    """Check every constraint of the original problem; violations are data.

    Returns an empty list iff transmit power, offload ratios, MEC budget,
    mobile regions and pairwise antenna spacing all hold within tolerances.
    """
    cfg = scenario.config
    out = []
    for k in range(cfg.num_ues):
        p = float(np.vdot(solution.precoders[k], solution.precoders[k]).real)
        if p > cfg.ue_power_mw + POWER_TOL:
            out.append(ConstraintViolation("power", (k,), p - cfg.ue_power_mw))
    total = float(np.sum(solution.mec_alloc))
    if total > scenario.tasks.mec_budget + BUDGET_TOL:
        out.append(ConstraintViolation("budget", (), total - scenario.tasks.mec_budget))
    for k, d in enumerate(np.asarray(solution.offload_ratios, dtype=float)):
        if d < -RATIO_TOL or d > 1.0 + RATIO_TOL:
            out.append(ConstraintViolation("offload_ratio", (k,),
                                           max(-d, d - 1.0)))
    half_tx = cfg.region_side_tx_m / 2.0
    half_rx = cfg.region_side_rx_m / 2.0
    ue_pos = solution.layout.ue_positions
    bs_pos = solution.layout.bs_positions
    for k in range(cfg.num_ues):
        excess = np.max(np.abs(ue_pos[k])) - half_tx
        if excess > REGION_TOL:
            out.append(ConstraintViolation("region_tx", (k,), float(excess)))
    excess = np.max(np.abs(bs_pos)) - half_rx
    if excess > REGION_TOL:
        out.append(ConstraintViolation("region_rx", (), float(excess)))
    d_min = cfg.min_spacing_m
    for k in range(cfg.num_ues):
        out.extend(_spacing_violations(ue_pos[k], d_min, "spacing_tx", (k,)))
    out.extend(_spacing_violations(bs_pos, d_min, "spacing_rx", ()))
    return out


def _spacing_violations(pos: np.ndarray, d_min: float, kind: str, prefix: tuple):
    n = pos.shape[0]
    found = []
    for i in range(n):
        diff = pos[i + 1:] - pos[i]
        dist = np.linalg.norm(diff, axis=1)
        for j_off, dd in enumerate(dist):
            if dd < d_min - SPACING_TOL:
                found.append(ConstraintViolation(kind, prefix + (i, i + 1 + j_off),
                                                 float(d_min - dd)))
    return found


# ---------------------------------------------------------------------------
# JSON serialization. Complex arrays are stored as nested [re, im] pairs.
# ---------------------------------------------------------------------------

def _complex_to_json(a: np.ndarray):
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _complex_from_json(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _pathset_to_json(p: PathSet):
    return {"elevations": p.elevations.tolist(), "azimuths": p.azimuths.tolist(),
            "gains": _complex_to_json(p.gains)}


def _pathset_from_json(d) -> PathSet:
    return PathSet(np.asarray(d["elevations"]), np.asarray(d["azimuths"]),
                   _complex_from_json(d["gains"]))


def config_to_dict(config: SystemConfig, tasks: TaskProfile) -> dict:
    return {"config": asdict(config), "tasks": asdict(tasks)}


def config_from_dict(doc: dict):
    try:
        config = SystemConfig(**doc.get("config", {}))
        tasks = TaskProfile(**doc.get("tasks", {}))
    except TypeError as exc:
        raise ConfigError(f"unknown configuration field: {exc}") from exc
    config.validate()
    tasks.validate()
    return config, tasks


def scenario_to_json(s: Scenario) -> str:
    doc = {
        "config": asdict(s.config),
        "tasks": asdict(s.tasks),
        "ue_paths": [_pathset_to_json(p) for p in s.ue_paths],
        "rx_paths": [_pathset_to_json(p) for p in s.rx_paths],
        "jam_rx_paths": _pathset_to_json(s.jam_rx_paths),
        "jam_tx_response": _complex_to_json(s.jam_tx_response),
        "jam_signal": _complex_to_json(s.jam_signal),
        "ue_distances": s.ue_distances.tolist(),
        "jam_distance": s.jam_distance,
        "rng_seed": s.rng_seed,
    }
    return json.dumps(doc, indent=2)


def scenario_from_json(text: str) -> Scenario:
    doc = json.loads(text)
    config, tasks = config_from_dict(doc)
    return Scenario(
        config=config, tasks=tasks,
        ue_paths=[_pathset_from_json(p) for p in doc["ue_paths"]],
        rx_paths=[_pathset_from_json(p) for p in doc["rx_paths"]],
        jam_rx_paths=_pathset_from_json(doc["jam_rx_paths"]),
        jam_tx_response=_complex_from_json(doc["jam_tx_response"]),
        jam_signal=_complex_from_json(doc["jam_signal"]),
        ue_distances=np.asarray(doc["ue_distances"], dtype=float),
        jam_distance=float(doc["jam_distance"]),
        rng_seed=int(doc["rng_seed"]),
    )
