"""Pilot design, LMMSE estimation and CSI bookkeeping checks."""

import numpy as np
import pytest

from fdmimo.channel import steering_vector
from fdmimo.estimation import (
    CsiRecord,
    NoSignalError,
    PilotConfig,
    age_csi,
    doa_estimate,
    estimation_error_variance,
    mmse_estimate,
    orthogonal_pilots,
)


def test_orthogonal_pilots_exact():
    for streams, length in ((1, 1), (2, 8), (4, 40), (3, 7)):
        p = orthogonal_pilots(streams, length)
        assert p.shape == (streams, length)
        assert np.allclose(np.abs(p), 1.0)
        assert np.allclose(p @ p.conj().T, length * np.eye(streams), atol=1e-9)
    with pytest.raises(ValueError):
        orthogonal_pilots(4, 3)


def test_error_variance_closed_form():
    # unit prior, unit noise, L unit-power pilots: error = 1 / (L + 1)
    assert estimation_error_variance(1.0, 10.0, 1.0) == pytest.approx(1.0 / 11.0, rel=1e-12)
    assert estimation_error_variance(1.0, 40.0, 1.0) == pytest.approx(1.0 / 41.0, rel=1e-12)
    assert estimation_error_variance(1.0, 400.0, 1.0) == pytest.approx(1.0 / 401.0, rel=1e-12)
    assert estimation_error_variance(2.0, 8.0, 0.5) == pytest.approx(1.0 / 16.5, rel=1e-12)
    for bad in ((0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 0.0)):
        with pytest.raises(ValueError):
            estimation_error_variance(*bad)


def test_mmse_noiseless_limit_recovers_channel():
    rng = np.random.default_rng(0)
    h = (rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))) / np.sqrt(2)
    p = orthogonal_pilots(2, 16)
    rec = mmse_estimate(h @ p, p, noise_var=1e-12, prior_var=1.0)
    assert np.allclose(rec.h_hat, h, atol=1e-6)
    assert rec.error_var < 1e-12


def test_mmse_shrinkage_factor():
    # noiseless observation still shrinks toward the prior mean (zero)
    h = np.array([[1.0 + 0.0j]])
    p = orthogonal_pilots(1, 4)
    rec = mmse_estimate(h @ p, p, noise_var=1.0, prior_var=1.0)
    assert rec.h_hat[0, 0] == pytest.approx(4.0 / 5.0, rel=1e-12)
    assert rec.error_var == pytest.approx(1.0 / 5.0, rel=1e-12)


def test_mmse_empirical_mse():
    # 2000 independent scalar channels estimated in one batched call
    rng = np.random.default_rng(1)
    length = 20
    h = (rng.standard_normal((2000, 1)) + 1j * rng.standard_normal((2000, 1))) / np.sqrt(2)
    p = orthogonal_pilots(1, length)
    noise = (rng.standard_normal((2000, length)) + 1j * rng.standard_normal((2000, length))) / np.sqrt(2)
    rec = mmse_estimate(h @ p + noise, p, noise_var=1.0, prior_var=1.0)
    emp = np.mean(np.abs(rec.h_hat - h) ** 2)
    assert emp == pytest.approx(estimation_error_variance(1.0, length, 1.0), rel=0.1)


def test_mmse_rejects_bad_pilots():
    y = np.zeros((2, 4), dtype=complex)
    with pytest.raises(ValueError):
        mmse_estimate(y, np.ones((2, 4)), noise_var=1.0, prior_var=1.0)
    with pytest.raises(ValueError):
        mmse_estimate(y, orthogonal_pilots(2, 8), noise_var=1.0, prior_var=1.0)


def test_age_csi_one_slot_rule():
    rng = np.random.default_rng(2)
    h_hat = rng.standard_normal((2, 3)) + 0j
    rec = CsiRecord(h_hat=h_hat, error_var=0.1, slot_index=3)
    h_next = rng.standard_normal((2, 3)) + 0j
    assert np.allclose(age_csi(rec, h_next, 4), h_next - h_hat)
    for slot in (3, 5):
        with pytest.raises(ValueError):
            age_csi(rec, h_next, slot)
    with pytest.raises(ValueError):
        age_csi(rec, np.zeros((3, 2)), 4)


def _sweep(angles, n):
    return np.stack([steering_vector(n, a) for a in angles])


def test_doa_recovers_planted_source():
    rng = np.random.default_rng(3)
    angles = np.linspace(-1.2, 1.2, 41)
    vectors = _sweep(angles, 8)
    s = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    y = np.outer(steering_vector(8, angles[17]), s)
    y += 0.001 * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    assert doa_estimate(y, vectors, angles) == angles[17]


def test_doa_snapshot_groups():
    rng = np.random.default_rng(4)
    angles = np.linspace(-1.0, 1.0, 9)
    vectors = _sweep(angles, 4)
    s = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    groups = [np.zeros((4, 16), dtype=complex) for _ in angles]
    groups[5] = np.outer(steering_vector(4, angles[5]), s)
    assert doa_estimate(np.zeros((4, 1)), vectors, angles, snapshot_groups=groups) == angles[5]
    with pytest.raises(ValueError):
        doa_estimate(np.zeros((4, 1)), vectors, angles, snapshot_groups=groups[:3])


def test_doa_all_zero_raises():
    angles = [-0.5, 0.0, 0.5]
    vectors = _sweep(angles, 4)
    with pytest.raises(NoSignalError):
        doa_estimate(np.zeros((4, 8), dtype=complex), vectors, angles)


def test_doa_tie_resolves_to_lowest_index():
    angles = [-0.4, 0.1, 0.7]
    v = steering_vector(4, 0.1)
    vectors = np.stack([v, v, v])
    y = np.outer(v, np.ones(8))
    assert doa_estimate(y, vectors, angles) == angles[0]
    with pytest.raises(ValueError):
        doa_estimate(y, vectors, angles[:2])


def test_pilot_config_validation():
    cfg = PilotConfig(num_pilots=40, power_dbm=10.0, num_streams=4)
    assert cfg.num_pilots == 40
    with pytest.raises(ValueError):
        PilotConfig(num_pilots=0)
    with pytest.raises(ValueError):
        PilotConfig(num_pilots=2, num_streams=3)
