"""Pilot-based channel estimation, CSI aging bookkeeping, DOA estimation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class NoSignalError(RuntimeError):
    """Every swept beam measured zero power; nothing to estimate."""


@dataclass(frozen=True)
class PilotConfig:
    """Pilot budget and training power.

    `num_pilots` is the per-packet training length; `power_dbm` the total
    training transmit power where the scenario fixes it (uplink training
    and self-interference calibration); `num_streams` how many orthogonal
    sequences share the budget.
    """

    num_pilots: int = 40
    power_dbm: float = 10.0
    num_streams: int = 1

    def __post_init__(self):
        if self.num_pilots < 1 or self.num_streams < 1:
            raise ValueError("num_pilots and num_streams must be >= 1")
        if self.num_pilots < self.num_streams:
            raise ValueError("need at least one pilot symbol per stream")


@dataclass
class CsiRecord:
    """Channel estimate plus the per-entry error variance and its slot."""

    h_hat: np.ndarray
    error_var: float
    slot_index: int


def orthogonal_pilots(num_streams: int, num_pilots: int) -> np.ndarray:
    """Unit-amplitude orthogonal pilot matrix (streams x pilots).

    Rows are distinct DFT tones of length `num_pilots`, so P P^H equals
    num_pilots * I exactly and each row has squared norm num_pilots.
    """
    if num_pilots < num_streams:
        raise ValueError("need at least one pilot symbol per stream")
    s = np.arange(num_streams)[:, None]
    t = np.arange(num_pilots)[None, :]
    return np.exp(2j * np.pi * s * t / num_pilots)


def estimation_error_variance(
    prior_var: float, pilot_energy: float, noise_var: float
) -> float:
    """Closed-form per-entry LMMSE error variance.

    `pilot_energy` is the squared norm of one pilot row including any
    power scaling applied to it.
    """
    if prior_var <= 0 or noise_var <= 0 or pilot_energy <= 0:
        raise ValueError("variances and pilot energy must be positive")
    return prior_var * noise_var / (prior_var * pilot_energy + noise_var)


def mmse_estimate(
    y: np.ndarray,
    pilots: np.ndarray,
    noise_var: float,
    prior_var: float,
    slot_index: int = 0,
) -> CsiRecord:
    """Per-entry LMMSE channel estimate from y = H P + W.

    Parameters
    ----------
    y : numpy.ndarray
        Received samples, receive dimension x pilot length.
    pilots : numpy.ndarray
        Orthogonal pilot matrix (streams x pilot length), power scaling
        included; rows must satisfy P P^H = L_p I.
    noise_var : float
        Per-entry receiver noise power in watts.
    prior_var : float
        Per-entry channel prior variance (link gain included).

    Returns
    -------
    CsiRecord
        Estimate of shape (receive dim, streams) with its error variance.
    """
    y = np.asarray(y, dtype=complex)
    p = np.asarray(pilots, dtype=complex)
    if y.shape[1] != p.shape[1]:
        raise ValueError("pilot length mismatch between y and pilots")
    gram = p @ p.conj().T
    energy = float(np.real(gram[0, 0]))
    if not np.allclose(gram, energy * np.eye(p.shape[0]), atol=1e-8 * max(energy, 1.0)):
        raise ValueError("pilot rows must be orthogonal with equal energy")
    shrink = prior_var / (prior_var * energy + noise_var)
    h_hat = shrink * (y @ p.conj().T)
    return CsiRecord(
        h_hat=h_hat,
        error_var=estimation_error_variance(prior_var, energy, noise_var),
        slot_index=slot_index,
    )


def age_csi(record: CsiRecord, h_true_next: np.ndarray, slot_index: int) -> np.ndarray:
    """Mismatch between a stale estimate and the channel one slot later.

    Enforces the pipeline rule that an estimate made in slot t is applied
    in slot t + 1.
    """
    if slot_index != record.slot_index + 1:
        raise ValueError("estimates must be applied exactly one slot after capture")
    h_true_next = np.asarray(h_true_next)
    if h_true_next.shape != record.h_hat.shape:
        raise ValueError("channel shape changed between slots")
    return h_true_next - record.h_hat


def doa_estimate(
    snapshots: np.ndarray,
    sweep_vectors: np.ndarray,
    sweep_angles: Sequence[float],
    snapshot_groups: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """On-grid direction estimate by exhaustive beam sweep.

    Parameters
    ----------
    snapshots : numpy.ndarray
        Receive-chain samples (chains x time) used for every beam when the
        sweep is evaluated digitally.
    sweep_vectors : numpy.ndarray
        One candidate combining vector per row (beams x chains).
    sweep_angles : sequence of float
        Pointing angle of each candidate beam, radians.
    snapshot_groups : sequence of numpy.ndarray, optional
        Per-beam snapshot groups for a time-multiplexed analog sweep; when
        given, beam b is scored only on its own group.

    Returns
    -------
    float
        Angle of the strongest beam; ties resolve to the lowest index.
    """
    sweep_vectors = np.asarray(sweep_vectors, dtype=complex)
    if len(sweep_angles) != sweep_vectors.shape[0]:
        raise ValueError("need one angle per sweep vector")
    if snapshot_groups is not None:
        if len(snapshot_groups) != sweep_vectors.shape[0]:
            raise ValueError("need one snapshot group per beam")
        powers = np.array(
            [
                np.mean(np.abs(w.conj() @ np.asarray(g)) ** 2)
                for w, g in zip(sweep_vectors, snapshot_groups)
            ]
        )
    else:
        y = np.asarray(snapshots, dtype=complex)
        powers = np.mean(np.abs(sweep_vectors.conj() @ y) ** 2, axis=1)
    if np.all(powers == 0):
        raise NoSignalError("all swept beams measured zero power")
    return float(sweep_angles[int(np.argmax(powers))])
