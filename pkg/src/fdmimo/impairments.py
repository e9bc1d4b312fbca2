"""Transmit RF chain impairment models: IQ imbalance and PA nonlinearity.

Signals are baseband complex samples whose instantaneous power |x|^2 is in
watts; any scenario-level scaling (drive level, back-off) happens before
these functions are applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def dbm_to_watt(p_dbm: float) -> float:
    """Convert a dBm power to watts."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_w: float) -> float:
    """Convert a watt power to dBm."""
    if p_w <= 0:
        raise ValueError("power must be positive")
    return 10.0 * np.log10(p_w) + 30.0


@dataclass(frozen=True)
class TxImpairmentConfig:
    """Per-chain transmit impairment settings.

    `iip3_dbm` is the input-referred third-order intercept of the PA model
    and `irr_db` the image rejection ratio of the IQ mixer.  `drive_dbm` is
    the per-chain power at which the RF hardware is driven: the simulator
    normalizes each chain to this level before applying the impairments and
    restores the commanded power afterwards, which models output gain
    staging at a fixed PA operating point.  `enabled=False` bypasses both
    impairments entirely.
    """

    iip3_dbm: float = 20.0
    irr_db: float = 30.0
    enabled: bool = True
    drive_dbm: float = -15.0

    def __post_init__(self):
        if self.irr_db <= 0:
            raise ValueError("irr_db must be positive")


def pa_nonlinearity(x: np.ndarray, iip3_dbm: float) -> np.ndarray:
    """Memoryless third-order PA model.

    y = x - (4 / (3 A^2)) * x * |x|^2 with A^2 the input-referred intercept
    power in watts, so a two-tone test at per-tone input power P dBm puts
    the third-order products at exactly 3P - 2*IIP3 dBm.  An infinite
    intercept returns the input unchanged.
    """
    if np.isinf(iip3_dbm):
        return np.asarray(x, dtype=complex)
    a2 = dbm_to_watt(iip3_dbm)
    x = np.asarray(x, dtype=complex)
    return x - (4.0 / (3.0 * a2)) * x * np.abs(x) ** 2


def iq_imbalance(x: np.ndarray, irr_db: float) -> np.ndarray:
    """Frequency-flat IQ mixer imbalance.

    Adds a conjugate image at -irr_db relative to the signal:
    y = x + nu * conj(x) with nu = 10^(-irr/20).
    """
    if np.isinf(irr_db):
        return np.asarray(x, dtype=complex)
    nu = 10.0 ** (-irr_db / 20.0)
    x = np.asarray(x, dtype=complex)
    return x + nu * np.conj(x)


def apply_tx_chain(x: np.ndarray, cfg: TxImpairmentConfig) -> np.ndarray:
    """Run per-chain samples through the IQ stage then the PA stage.

    `x` holds one chain per row (or a single vector); the same hardware
    model applies to every chain.
    """
    x = np.asarray(x, dtype=complex)
    if not cfg.enabled:
        return x
    return pa_nonlinearity(iq_imbalance(x, cfg.irr_db), cfg.iip3_dbm)
