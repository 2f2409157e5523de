"""Field-response channel synthesis for planar movable antennas.

Channels are deterministic functions of antenna coordinates: each link is a
sum over a small number of propagation paths, where every path contributes a
unit-modulus phase ramp across the array. Moving an antenna re-phases the
paths, which is the entire mechanism the position optimizer exploits.

All functions here are pure; arrays are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PathSet:
    """Propagation paths of one link.

    elevations / azimuths are radians in [0, pi], one per path; gains are the
    complex per-path amplitudes (diagonal of the path-gain matrix).
    """

    elevations: np.ndarray
    azimuths: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        el = np.atleast_1d(np.asarray(self.elevations, dtype=float))
        az = np.atleast_1d(np.asarray(self.azimuths, dtype=float))
        g = np.atleast_1d(np.asarray(self.gains, dtype=complex))
        object.__setattr__(self, "elevations", el)
        object.__setattr__(self, "azimuths", az)
        object.__setattr__(self, "gains", g)
        if el.shape != az.shape or el.ndim != 1:
            raise GeometryError("elevations and azimuths must be equal-length 1-D")
        if g.shape != el.shape:
            raise GeometryError("gains length must equal path count")
        if el.size < 1:
            raise GeometryError("a link needs at least one path")
        if np.any(el < -1e-12) or np.any(el > np.pi + 1e-12):
            raise GeometryError("elevation angles must lie in [0, pi]")
        if np.any(az < -1e-12) or np.any(az > np.pi + 1e-12):
            raise GeometryError("azimuth angles must lie in [0, pi]")

    @property
    def count(self) -> int:
        return self.elevations.size

    def directions(self) -> np.ndarray:
        """Planar direction vector of each path, shape (L, 2).

        Row l is (cos el * cos az, cos el * sin az): the gradient of the path
        phase with respect to the antenna coordinate, up to the 2*pi/lambda
        factor.
        """
        ce = np.cos(self.elevations)
        return np.stack([ce * np.cos(self.azimuths), ce * np.sin(self.azimuths)], axis=1)

    def height_phase(self, height: float) -> np.ndarray:
        """Constant per-path phase offset (meters) from an elevated array."""
        return height * np.sin(self.elevations)


@dataclass(frozen=True)
class AntennaLayout:
    """Current coordinates of every movable antenna.

    ue_positions has shape (K, N_t, 2), bs_positions (N_r, 2); units meters.
    """

    ue_positions: np.ndarray
    bs_positions: np.ndarray
    bs_height: float

    def __post_init__(self):
        ue = np.asarray(self.ue_positions, dtype=float)
        bs = np.asarray(self.bs_positions, dtype=float)
        object.__setattr__(self, "ue_positions", ue)
        object.__setattr__(self, "bs_positions", bs)
        if ue.ndim != 3 or ue.shape[2] != 2:
            raise GeometryError("ue_positions must have shape (K, N_t, 2)")
        if bs.ndim != 2 or bs.shape[1] != 2:
            raise GeometryError("bs_positions must have shape (N_r, 2)")


def field_response_vector(position, height_term: float, paths: PathSet,
                          wavelength: float) -> np.ndarray:
    """Unit-modulus response of one antenna at `position`, shape (L,).

    Entry l is exp(j * (2*pi/wavelength) * (dir_l . position + height_term * sin(el_l))).
    """
    if wavelength <= 0:
        raise GeometryError("wavelength must be positive")
    p = np.asarray(position, dtype=float).reshape(2)
    phase = paths.directions() @ p + paths.height_phase(height_term)
    return np.exp(1j * (TWO_PI / wavelength) * phase)


def field_response_matrix(positions: np.ndarray, height_term: float,
                          paths: PathSet, wavelength: float) -> np.ndarray:
    """Stacked response of a whole array, shape (L, N)."""
    if wavelength <= 0:
        raise GeometryError("wavelength must be positive")
    pos = np.asarray(positions, dtype=float)
    phase = paths.directions() @ pos.T + paths.height_phase(height_term)[:, None]
    return np.exp(1j * (TWO_PI / wavelength) * phase)


def uplink_channel(layout: AntennaLayout, ue_index: int, ue_paths: PathSet,
                   rx_paths: PathSet, wavelength: float) -> np.ndarray:
    """Channel of one UE link, shape (N_r, N_t): A(p_r)^H diag(gains) A(p_k).

    Path gains are taken from `ue_paths`; `rx_paths` supplies only the
    receive-side angles (its gains field is ignored).
    """
    if ue_paths.count != rx_paths.count:
        raise GeometryError(
            f"transmit/receive path counts differ: {ue_paths.count} vs {rx_paths.count}")
    a_t = field_response_matrix(layout.ue_positions[ue_index], 0.0, ue_paths, wavelength)
    a_r = field_response_matrix(layout.bs_positions, layout.bs_height, rx_paths, wavelength)
    return a_r.conj().T @ (ue_paths.gains[:, None] * a_t)


def jammer_channel(layout: AntennaLayout, jam_rx_paths: PathSet,
                   jam_tx_response: np.ndarray, wavelength: float) -> np.ndarray:
    """Jammer-to-BS channel, shape (N_r, N_J): A_J(p_r)^H diag(gains) A_tx.

    The jammer transmits from fixed antennas, so `jam_tx_response` is a
    constant (L_tilde, N_J) matrix; only the receive response depends on the
    BS antenna coordinates.
    """
    tx = np.asarray(jam_tx_response, dtype=complex)
    if tx.ndim != 2 or tx.shape[0] != jam_rx_paths.count:
        raise GeometryError(
            f"jam_tx_response must be ({jam_rx_paths.count}, N_J), got {tx.shape}")
    a_j = field_response_matrix(layout.bs_positions, layout.bs_height,
                                jam_rx_paths, wavelength)
    return a_j.conj().T @ (jam_rx_paths.gains[:, None] * tx)


def sinr_and_rate(channels, jam: np.ndarray, precoders, combiners,
                  jam_signal: np.ndarray, noise_power: float):
    """Per-UE SINR and spectral efficiency (bits/s/Hz).

    sinr_k = |f_k^H H_k w_k|^2 /
             (sum_{k'!=k} |f_k^H H_k' w_k'|^2 + ||f_k||^2 sigma^2 + |f_k^H H_J z|^2)

    A zero combiner yields sinr 0 (degenerate but well defined).
    """
    if noise_power <= 0:
        raise GeometryError("noise_power must be positive")
    channels = [np.asarray(h, dtype=complex) for h in channels]
    k_total = len(channels)
    precoders = np.asarray(precoders, dtype=complex)
    combiners = np.asarray(combiners, dtype=complex)
    z = np.asarray(jam_signal, dtype=complex)
    # beamformed amplitudes: amp[k, k'] = f_k^H H_k' w_k'
    amp = np.empty((k_total, k_total), dtype=complex)
    for kp, h in enumerate(channels):
        hw = h @ precoders[kp]
        amp[:, kp] = combiners.conj() @ hw
    jam_amp = combiners.conj() @ (jam @ z)
    sinr = np.zeros(k_total)
    for k in range(k_total):
        fnorm2 = float(np.vdot(combiners[k], combiners[k]).real)
        if fnorm2 == 0.0:
            continue
        signal = abs(amp[k, k]) ** 2
        interf = float(np.sum(np.abs(amp[k, :]) ** 2)) - signal
        denom = interf + fnorm2 * noise_power + abs(jam_amp[k]) ** 2
        sinr[k] = signal / denom
    rate = np.log2(1.0 + sinr)
    return sinr, rate
