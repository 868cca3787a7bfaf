"""Analytic mixture density, scores, and trap behavior.

The score is checked against central finite differences of the log
density, which is the independent ground truth everything else leans on.
"""

from __future__ import annotations

import numpy as np
import pytest

from artifact import (ConfigError, GmmModel, GmmOracle, TrapSpec, TrappedOracle,
                      builtin_template, default_model, log_density, mad,
                      make_grid, make_schedule, responsibilities, rollout,
                      sample_data, temporal_weight, true_score)
from artifact.schedule import alpha_bar_at


def single_component(mu: float = 0.0, sigma0: float = 1.0) -> GmmModel:
    return GmmModel(weights=np.array([1.0]),
                    templates=np.full((1, 1, 16, 16), mu), sigma0=sigma0)


# --- density / score ---

def test_score_matches_finite_differences(sched, model):
    rng = np.random.default_rng(42)
    h = 1e-4
    for _ in range(40):
        t = int(rng.integers(1, 1001))
        x = rng.normal(size=(1, 16, 16)) * rng.uniform(0.3, 2.0)
        s = true_score(model, sched, x, t)
        idx = (0, int(rng.integers(16)), int(rng.integers(16)))
        xp = x.copy(); xp[idx] += h
        xm = x.copy(); xm[idx] -= h
        fd = (log_density(model, sched, xp, t) - log_density(model, sched, xm, t)) / (2 * h)
        assert s[idx] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_single_component_score_closed_form(sched):
    # K=1, sigma0=1: marginal variance is abar + 1 - abar = 1, so
    # score = sqrt(abar) * mu - x.
    mu = 0.7
    m = single_component(mu=mu)
    rng = np.random.default_rng(0)
    for t in (1, 480, 1000):
        x = rng.normal(size=(1, 16, 16))
        expected = np.sqrt(alpha_bar_at(sched, t)) * mu - x
        np.testing.assert_allclose(true_score(m, sched, x, t), expected, rtol=1e-12)


def test_symmetric_two_component_score_vanishes_at_origin(sched):
    # Components mirrored through zero make the origin a stationary point.
    tpl = np.zeros((2, 1, 16, 16))
    tpl[0] += 0.5
    tpl[1] -= 0.5
    m = GmmModel(weights=np.array([0.5, 0.5]), templates=tpl, sigma0=0.05)
    x = np.zeros((1, 16, 16))
    for t in (100, 500, 900):
        np.testing.assert_allclose(true_score(m, sched, x, t), 0.0, atol=1e-12)


def test_responsibilities_sum_to_one(sched, model):
    rng = np.random.default_rng(5)
    x = rng.normal(size=(1, 16, 16))
    for t in (1, 250, 990):
        r = responsibilities(model, sched, x, t)
        assert r.shape == (4,)
        assert float(r.sum()) == pytest.approx(1.0, abs=1e-12)
        assert np.all(r >= 0)


def test_responsibilities_sharpen_near_a_component(sched, model):
    x = model.templates[2] * np.sqrt(alpha_bar_at(sched, 40))
    r = responsibilities(model, sched, x, 40)
    assert int(np.argmax(r)) == 2
    assert r[2] > 0.999


def test_log_density_batched_matches_single(sched, model):
    xb = np.random.default_rng(9).normal(size=(5, 1, 16, 16))
    lb = log_density(model, sched, xb, 300)
    assert lb.shape == (5,)
    for i in range(5):
        assert lb[i] == pytest.approx(float(log_density(model, sched, xb[i], 300)), rel=1e-12)
    sb = true_score(model, sched, xb, 300)
    np.testing.assert_allclose(sb[3], true_score(model, sched, xb[3], 300), rtol=1e-12)


def test_sample_frequencies_match_weights(model):
    n = 20000
    x = sample_data(model, n, seed=123)
    assert x.shape == (n, 1, 16, 16)
    # nearest-template assignment recovers the mixture weights
    flat = x.reshape(n, -1)
    tpl = model.templates.reshape(4, -1)
    d2 = ((flat[:, None, :] - tpl[None, :, :]) ** 2).sum(axis=2)
    counts = np.bincount(np.argmin(d2, axis=1), minlength=4) / n
    np.testing.assert_allclose(counts, model.weights, atol=0.02)


def test_sample_noise_level(model):
    x = sample_data(model, 4000, seed=7)
    flat = x.reshape(4000, -1)
    tpl = model.templates.reshape(4, -1)
    d2 = ((flat[:, None, :] - tpl[None, :, :]) ** 2).sum(axis=2)
    resid = np.sqrt(d2.min(axis=1) / flat.shape[1])
    assert np.median(resid) == pytest.approx(model.sigma0, rel=0.05)


def test_model_validation():
    with pytest.raises(ConfigError):
        GmmModel(weights=np.array([0.6, 0.6]), templates=np.zeros((2, 1, 4, 4)),
                 sigma0=0.05)
    with pytest.raises(ConfigError):
        GmmModel(weights=np.array([1.0]), templates=np.zeros((1, 4, 4)), sigma0=0.05)
    with pytest.raises(ConfigError):
        GmmModel(weights=np.array([1.0]), templates=np.zeros((1, 1, 4, 4)), sigma0=-1.0)


def test_builtin_templates():
    for name in ("checkerboard", "gradient", "disk", "stripes"):
        tpl = builtin_template(name)
        assert tpl.shape == (1, 16, 16)
        assert np.abs(tpl).max() <= 0.9 + 1e-12
    with pytest.raises(ConfigError):
        builtin_template("spiral")


def test_default_model_shape(model):
    assert model.n_components == 4
    assert model.image_shape == (1, 16, 16)
    np.testing.assert_allclose(model.weights, [0.3, 0.3, 0.2, 0.2])


def test_oracle_wraps_true_score(sched, model):
    oracle = GmmOracle(model, sched)
    x = np.random.default_rng(3).normal(size=(1, 16, 16))
    np.testing.assert_array_equal(oracle(x, 500), true_score(model, sched, x, 500))
    assert oracle.image_shape == (1, 16, 16)


# --- traps ---

def spike_trap(**kw) -> TrapSpec:
    base = dict(region=(4, 5, 7, 7), trigger_step=680, spike_gain=8.0)
    base.update(kw)
    return TrapSpec(**base)


def test_trap_spec_validation():
    with pytest.raises(ConfigError):
        TrapSpec(region=(0, 0, 0, 4), trigger_step=680)
    with pytest.raises(ConfigError):
        TrapSpec(region=(-1, 0, 4, 4), trigger_step=680)
    with pytest.raises(ConfigError):
        spike_trap(spike_steps=0)
    with pytest.raises(ConfigError):
        spike_trap(mode="melt")
    with pytest.raises(ConfigError):
        TrappedOracle(default_model(), make_schedule(),
                      [TrapSpec(region=(12, 12, 8, 8), trigger_step=680)])


def test_trap_mask_geometry():
    m = spike_trap().mask(16, 16)
    assert m.sum() == 49
    assert m[4, 5] and m[10, 11] and not m[3, 5] and not m[4, 4]


def test_emissions_clean_before_trigger_and_outside_region(sched, model, grid25):
    spec = spike_trap()
    oracle = TrappedOracle(model, sched, [spec])
    clean = GmmOracle(model, sched)
    x = np.random.default_rng(8).normal(size=(1, 16, 16))
    # above the trigger the trap is pending and emission is bit-identical
    for t in (1000, 960, 720):
        np.testing.assert_array_equal(oracle(x, t), clean(x, t))
    # at the trigger, only the region deviates
    got = oracle(x, 680)
    want = clean(x, 680)
    m = spec.mask(16, 16)
    np.testing.assert_array_equal(got[:, ~m], want[:, ~m])
    assert np.all(got[:, m] != want[:, m])


def test_spike_injection_follows_cumulative_pulse(sched, model, grid25):
    # The injected weighted level at spike step j is exactly
    # gain * A_amb * cumsum(pulse)_j with pulse = [0.5, 1, 0.5], where
    # A_amb is the ambient mean |w * s| at the step before the trigger.
    spec = spike_trap()
    oracle = TrappedOracle(model, sched, [spec])
    traj = rollout(oracle, sched, grid25, seed=21)
    m = spec.mask(16, 16)
    ts = list(traj.timesteps)
    i_prev = ts.index(720)
    a_amb = float(np.mean(np.abs(
        temporal_weight(sched, 720) * traj.scores[i_prev][:, ~m])))
    for t, cum in ((680, 0.5), (640, 1.5), (600, 2.0)):
        i = ts.index(t)
        inj = temporal_weight(sched, t) * (
            traj.scores[i] - true_score(model, sched, traj.states[i], t))[:, m]
        np.testing.assert_allclose(np.abs(inj), spec.spike_gain * a_amb * cum,
                                   rtol=1e-12)
    # the emitted dynamics peak at the center pair of the pulse
    lv = {}
    for t in (720, 680, 640, 600):
        i = ts.index(t)
        lv[t] = temporal_weight(sched, t) * traj.scores[i][:, m]
    jumps = {t: float(np.mean(np.abs(lv[t] - lv[prev])))
             for t, prev in ((680, 720), (640, 680), (600, 640))}
    assert jumps[640] > jumps[680] > jumps[600]


def test_spike_sign_pattern_is_stable_across_steps(sched, model, grid25):
    spec = spike_trap()
    oracle = TrappedOracle(model, sched, [spec])
    traj = rollout(oracle, sched, grid25, seed=21)
    m = spec.mask(16, 16)
    ts = list(traj.timesteps)
    signs = []
    for t in (680, 640, 600):
        i = ts.index(t)
        inj = (traj.scores[i] - true_score(model, sched, traj.states[i], t))[:, m]
        signs.append(np.sign(inj))
    np.testing.assert_array_equal(signs[0], signs[1])
    np.testing.assert_array_equal(signs[0], signs[2])
    assert set(np.unique(signs[0])) == {-1.0, 1.0}


def test_spike_exceeds_contemporaneous_mad(sched, model, grid25):
    # At the pulse peak the in-region weighted jump dwarfs the ambient MAD
    # of the same pair: the gain is a detectability multiple by design.
    spec = spike_trap()
    oracle = TrappedOracle(model, sched, [spec])
    traj = rollout(oracle, sched, grid25, seed=22)
    m = spec.mask(16, 16)
    ts = list(traj.timesteps)
    i_hi, i_lo = ts.index(680), ts.index(640)
    d = (temporal_weight(sched, 640) * traj.scores[i_lo]
         - temporal_weight(sched, 680) * traj.scores[i_hi])[0]
    peak = float(np.median(np.abs(d[m])))
    ambient_mad = mad(np.abs(d[~m]))
    assert peak > 5.0 * ambient_mad


def test_freeze_only_locks_noise_prediction(sched, model, grid25):
    # After the trigger the in-region emission equals the snapshot rescaled
    # by sqrt(1-abar): the locked quantity is the noise prediction.
    spec = spike_trap(mode="freeze_only")
    oracle = TrappedOracle(model, sched, [spec])
    traj = rollout(oracle, sched, grid25, seed=23)
    assert oracle.trap_phases() == ("frozen",)
    m = spec.mask(16, 16)
    ts = list(traj.timesteps)
    i0 = ts.index(680)
    ref = np.sqrt(1 - alpha_bar_at(sched, 680)) * traj.scores[i0][:, m]
    for t in (640, 480, 200, 40):
        i = ts.index(t)
        got = np.sqrt(1 - alpha_bar_at(sched, t)) * traj.scores[i][:, m]
        np.testing.assert_allclose(got, ref, rtol=1e-12)


def test_spike_then_freeze_phase_sequence(sched, model, grid25):
    # Phases advance only when the state follows the sampler's own step;
    # the walk below replays exactly that.
    from artifact import ddim_step
    spec = spike_trap()
    oracle = TrappedOracle(model, sched, [spec])
    oracle.reset()
    x = np.random.default_rng(1).normal(size=(1, 16, 16))
    assert oracle.trap_phases() == ("pending",)
    expect = {720: "pending", 680: "spiking", 640: "spiking", 600: "frozen",
              560: "frozen"}
    for t_from, t_to in ((720, 680), (680, 640), (640, 600), (600, 560), (560, 520)):
        s = oracle(x, t_from)
        assert oracle.trap_phases() == (expect[t_from],)
        x = ddim_step(x, s, sched, t_from, t_to)


def test_clean_rollout_never_releases(sched, model, grid25):
    for mode in ("spike_then_freeze", "freeze_only"):
        oracle = TrappedOracle(model, sched, [spike_trap(mode=mode)])
        rollout(oracle, sched, grid25, seed=31)
        assert oracle.trap_phases() == ("frozen",)


def test_perturbed_state_releases_trap(sched, model, grid25):
    spec = spike_trap()
    oracle = TrappedOracle(model, sched, [spec])
    oracle.reset()
    rng = np.random.default_rng(2)
    x = rng.normal(size=(1, 16, 16))
    from artifact import ddim_step
    for t_from, t_to in ((720, 680), (680, 640), (640, 600)):
        s = oracle(x, t_from)
        x = ddim_step(x, s, sched, t_from, t_to)
    assert oracle.trap_phases() == ("spiking",)
    # a same-state re-query keeps the trap; an in-region kick releases it
    oracle(x, 600)
    x2 = x.copy()
    rs, cs = spec.slices()
    x2[:, rs, cs] += 0.5
    oracle(x2, 560)
    assert oracle.trap_phases() == ("released",)


def test_released_trap_emits_true_score(sched, model):
    spec = spike_trap()
    oracle = TrappedOracle(model, sched, [spec])
    oracle.reset()
    rng = np.random.default_rng(4)
    x = rng.normal(size=(1, 16, 16))
    from artifact import ddim_step
    for t_from, t_to in ((720, 680), (680, 640), (640, 600), (600, 560)):
        s = oracle(x, t_from)
        x = ddim_step(x, s, sched, t_from, t_to)
    x[:, spec.slices()[0], spec.slices()[1]] -= 1.0
    got = oracle(x, 560)
    np.testing.assert_array_equal(got, true_score(model, sched, x, 560))


def test_reset_restores_pending(sched, model, grid25):
    spec = spike_trap()
    oracle = TrappedOracle(model, sched, [spec])
    rollout(oracle, sched, grid25, seed=6)
    assert oracle.trap_phases() == ("frozen",)
    oracle.reset()
    assert oracle.trap_phases() == ("pending",)
    # the same seed reproduces the identical trajectory after reset
    a = rollout(oracle, sched, grid25, seed=6)
    b = rollout(oracle, sched, grid25, seed=6)
    np.testing.assert_array_equal(a.scores, b.scores)
    np.testing.assert_array_equal(a.x0, b.x0)


def test_trap_pattern_is_seed_stable(sched, model, grid25):
    spec = spike_trap()
    a = TrappedOracle(model, sched, [spec])
    b = TrappedOracle(model, sched, [spec])
    ta = rollout(a, sched, grid25, seed=9)
    tb = rollout(b, sched, grid25, seed=9)
    np.testing.assert_array_equal(ta.scores, tb.scores)
    # a different pattern seed changes the in-region sign pattern
    c = TrappedOracle(model, sched, [spike_trap(seed=1)])
    tc = rollout(c, sched, grid25, seed=9)
    m = spec.mask(16, 16)
    i = list(ta.timesteps).index(640)
    assert not np.array_equal(ta.scores[i][:, m], tc.scores[i][:, m])
    np.testing.assert_array_equal(ta.scores[0], tc.scores[0])


def test_two_traps_trigger_independently(sched, model, grid25):
    s1 = spike_trap(region=(1, 1, 5, 5), trigger_step=720)
    s2 = spike_trap(region=(10, 10, 5, 5), trigger_step=600, mode="freeze_only")
    oracle = TrappedOracle(model, sched, [s1, s2])
    traj = rollout(oracle, sched, grid25, seed=12)
    assert oracle.trap_phases() == ("frozen", "frozen")
    ts = list(traj.timesteps)
    m1, m2 = s1.mask(16, 16), s2.mask(16, 16)
    # until its own trigger, a trap's region emits the true score of the
    # current state, even while the other trap is already active
    for t in (720, 680, 640):
        i = ts.index(t)
        exact = true_score(model, sched, traj.states[i], t)
        np.testing.assert_array_equal(traj.scores[i][:, m2], exact[:, m2])
        assert not np.array_equal(traj.scores[i][:, m1], exact[:, m1])
    i = ts.index(560)
    exact = true_score(model, sched, traj.states[i], 560)
    assert not np.array_equal(traj.scores[i][:, m2], exact[:, m2])
