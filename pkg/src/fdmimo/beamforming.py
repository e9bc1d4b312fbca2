"""Analog and digital beamforming: codebooks, phase quantization, precoders.

The analog side models partially connected hybrid arrays: each RF chain
drives one contiguous sub-array through phase shifters of limited
resolution, so analog beamforming matrices are block diagonal with
constant-modulus nonzero entries.  The digital side provides the standard
zero-forcing, MMSE and eigenmode designs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class SingularChannelError(np.linalg.LinAlgError):
    """Channel matrix too ill conditioned for the requested design."""


@dataclass(frozen=True)
class ArchitectureConfig:
    """Transceiver array geometry and hardware budgets.

    `n_tx` / `n_rx` count antennas, `n_tx_rf` / `n_rx_rf` RF chains, and
    `num_taps` the analog canceller taps.  In `"digital"` mode every
    antenna has a dedicated chain and the analog stage is the identity;
    `"hybrid"` mode splits each side into equal contiguous sub-arrays.
    """

    n_tx: int
    n_rx: int
    n_tx_rf: int
    n_rx_rf: int
    phase_bits: int = 3
    num_taps: int = 0
    bf_mode: str = "hybrid"

    def __post_init__(self):
        if min(self.n_tx, self.n_rx, self.n_tx_rf, self.n_rx_rf) < 1:
            raise ValueError("antenna and chain counts must be positive")
        if self.n_tx_rf > self.n_tx or self.n_rx_rf > self.n_rx:
            raise ValueError("cannot have more RF chains than antennas")
        if self.n_tx % self.n_tx_rf or self.n_rx % self.n_rx_rf:
            raise ValueError("antennas must split evenly across RF chains")
        if self.bf_mode not in ("digital", "hybrid"):
            raise ValueError("bf_mode must be 'digital' or 'hybrid'")
        if self.bf_mode == "digital" and (
            self.n_tx != self.n_tx_rf or self.n_rx != self.n_rx_rf
        ):
            raise ValueError("digital mode requires one RF chain per antenna")
        if self.phase_bits < 1:
            raise ValueError("phase_bits must be >= 1")
        if not 0 <= self.num_taps <= self.n_tx_rf * self.n_rx_rf:
            raise ValueError("num_taps must lie in [0, n_tx_rf * n_rx_rf]")

    @property
    def tx_subarray(self) -> int:
        return self.n_tx // self.n_tx_rf

    @property
    def rx_subarray(self) -> int:
        return self.n_rx // self.n_rx_rf


def quantize_phases(v: np.ndarray, phase_bits: int) -> np.ndarray:
    """Map a complex vector onto the constant-modulus quantized-phase grid.

    Moduli are discarded; each phase snaps to the nearest point of the
    2^bits grid with ties resolved toward the smaller grid phase.  The
    result is scaled to unit norm.
    """
    v = np.asarray(v, dtype=complex)
    phases = _snap_phases(np.angle(v), phase_bits)
    return np.exp(1j * phases) / np.sqrt(v.size)


def _snap_phases(phases: np.ndarray, phase_bits: int) -> np.ndarray:
    if phase_bits < 1:
        raise ValueError("phase_bits must be >= 1")
    step = 2.0 * np.pi / (2**phase_bits)
    # ceil(x - 0.5) rounds to nearest with exact halves going down
    return step * np.ceil(np.asarray(phases) / step - 0.5)


def dft_codebook(n: int, phase_bits: int) -> np.ndarray:
    """DFT beam codebook for an n-element sub-array, one codeword per row.

    Codeword k has element m equal to exp(j q(2 pi k m / n)) / sqrt(n)
    where q() snaps to the phase-shifter grid, so every codeword is
    realizable by the hardware.
    """
    if n < 1:
        raise ValueError("array size must be positive")
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    phases = _snap_phases(2.0 * np.pi * k * m / n, phase_bits)
    return np.exp(1j * phases) / np.sqrt(n)


def dft_beam_angles(n: int) -> np.ndarray:
    """Pointing angles (radians) of the n DFT codewords, codeword order."""
    k = np.arange(n)
    s = np.mod(-2.0 * k / n + 1.0, 2.0) - 1.0
    return np.arcsin(s)


@dataclass(frozen=True)
class AnalogBeamformer:
    """Assembled analog beamforming matrix and the codeword index per sub-array."""

    matrix: np.ndarray
    beam_indices: tuple


def assemble_analog_bf(
    beam_indices: Sequence[int], cfg: ArchitectureConfig, side: str
) -> AnalogBeamformer:
    """Build the block-diagonal analog matrix from per-sub-array codewords.

    In digital mode the matrix is the identity and `beam_indices` is
    ignored.  Every nonzero entry has modulus 1/sqrt(sub-array size), so
    each column is unit norm.
    """
    if side == "tx":
        n_ant, n_rf = cfg.n_tx, cfg.n_tx_rf
    elif side == "rx":
        n_ant, n_rf = cfg.n_rx, cfg.n_rx_rf
    else:
        raise ValueError("side must be 'tx' or 'rx'")
    if cfg.bf_mode == "digital":
        return AnalogBeamformer(np.eye(n_ant, dtype=complex), tuple())
    sub = n_ant // n_rf
    if len(beam_indices) != n_rf:
        raise ValueError("need one beam index per RF chain")
    book = dft_codebook(sub, cfg.phase_bits)
    f = np.zeros((n_ant, n_rf), dtype=complex)
    for j, idx in enumerate(beam_indices):
        if not 0 <= idx < sub:
            raise ValueError("beam index outside codebook")
        f[j * sub : (j + 1) * sub, j] = book[idx]
    return AnalogBeamformer(f, tuple(int(i) for i in beam_indices))


def select_subarray_beams(h: np.ndarray, codebook: np.ndarray, num_rf: int, side: str):
    """Exhaustive per-sub-array codeword search maximizing captured channel power.

    For the transmit side, sub-array j sees the channel columns of its
    antennas and scores codeword g by ||H[:, block] g||; the receive side
    scores f by ||f^H H[block, :]||.  Ties resolve to the lowest codeword
    index.
    """
    n_beams, sub = codebook.shape
    indices = []
    for j in range(num_rf):
        blk = slice(j * sub, (j + 1) * sub)
        if side == "tx":
            scores = np.linalg.norm(h[:, blk] @ codebook.T, axis=0)
        elif side == "rx":
            scores = np.linalg.norm(codebook.conj() @ h[blk, :], axis=1)
        else:
            raise ValueError("side must be 'tx' or 'rx'")
        indices.append(int(np.argmax(scores)))
    return indices


def beam_select_doa(theta: float, codebook: np.ndarray) -> int:
    """Codeword best aligned with a departure angle, lowest index on ties.

    The score is |sum_m a_m(theta) c_m| with a the ULA phase progression,
    matching how a steered channel row couples into a precoding codeword.
    """
    sub = codebook.shape[1]
    a = np.exp(1j * np.pi * np.arange(sub) * np.sin(theta))
    return int(np.argmax(np.abs(codebook @ a)))


def zf_precoder(h: np.ndarray, stream_powers: Sequence[float] | None = None) -> np.ndarray:
    """Zero-forcing precoder for a users x chains channel.

    Returns W = H^H (H H^H)^-1 with columns scaled by per-stream weights
    and normalized to unit Frobenius norm, so H W is diagonal.
    """
    h = np.asarray(h, dtype=complex)
    users, chains = h.shape
    if users > chains:
        raise ValueError("more streams than transmit chains")
    gram = h @ h.conj().T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularChannelError(f"channel Gram matrix condition {cond:.3e}")
    w = h.conj().T @ np.linalg.inv(gram)
    if stream_powers is not None:
        if len(stream_powers) != users or np.any(np.asarray(stream_powers) < 0):
            raise ValueError("stream_powers must be nonnegative, one per stream")
        w = w * np.sqrt(np.asarray(stream_powers))[None, :]
    norm = np.linalg.norm(w)
    if norm == 0:
        raise SingularChannelError("zero-forcing solution collapsed to zero")
    return w / norm


def mmse_combiner(h: np.ndarray, noise_cov: np.ndarray) -> np.ndarray:
    """Linear MMSE receive combiner for chains x streams channel h.

    `noise_cov` is the covariance of noise plus residual interference at
    the receive chains and must be Hermitian positive definite.
    """
    h = np.asarray(h, dtype=complex)
    r = np.asarray(noise_cov, dtype=complex)
    try:
        np.linalg.cholesky(0.5 * (r + r.conj().T))
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError("noise covariance not positive definite") from exc
    rinv_h = np.linalg.solve(r, h)
    inner = np.eye(h.shape[1], dtype=complex) + h.conj().T @ rinv_h
    return rinv_h @ np.linalg.inv(inner)


def eigen_precoder(h: np.ndarray, num_streams: int) -> np.ndarray:
    """Equal-power precoder on the dominant right singular vectors of h.

    The result has orthonormal columns scaled by 1/sqrt(num_streams), so
    its squared Frobenius norm is one.
    """
    h = np.asarray(h, dtype=complex)
    if not 1 <= num_streams <= min(h.shape):
        raise ValueError("num_streams must lie in [1, min(h.shape)]")
    _, _, vh = np.linalg.svd(h)
    return vh[:num_streams].conj().T / np.sqrt(num_streams)
