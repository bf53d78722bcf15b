import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from css_snn.neuron import (
    FixedPointParams,
    FixedTmnState,
    NeuronStateError,
    SpikeTrain,
    TmnConfig,
    TmnState,
    direct_weighted_integrate,
    if_forward,
    if_step,
    tmn_forward,
    tmn_forward_fixed,
    tmn_step,
    tmn_step_fixed,
)
from css_snn.tensor import ShapeError


def scalar_tmn(z, v_th=1.0, alpha=0.5, P=0, gate=False):
    """Hand-written reference loop, independent of the library step function."""
    u, latch, out = 0.0, False, []
    for t, zt in enumerate(z):
        u = 2 * u + zt
        s = 0
        if t >= P:
            thr, reset = alpha * 2**P * v_th, 2**P * v_th
            if u >= thr:
                s = 1
            elif u <= -thr and (latch or not gate):
                s = -1
            latch = latch or s == 1
            u -= reset * s
        out.append(s)
    return out, u


def run_steps(z, cfg):
    st_ = TmnState()
    return [tmn_step(st_, zt, cfg) for zt in z], st_.u


seqs = st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=12)


class TestIF:
    def test_silent(self):
        s = TmnState()
        assert if_step(s, 0.0, 1.0) == 0 and s.u == 0.0

    def test_hand_arithmetic(self):
        s = TmnState(u=0.6)
        assert if_step(s, 0.6, 1.0) == 1
        assert s.u == pytest.approx(0.2)

    def test_constant_current_count(self):
        s = TmnState()
        assert sum(if_step(s, 0.3, 1.0) for _ in range(10)) == 3

    def test_vectorized_matches_scalar(self):
        z = np.random.default_rng(0).uniform(0, 1, (16, 20))
        spikes, u = if_forward(z, 1.0)
        for j in range(20):
            s = TmnState()
            ref = [if_step(s, zt, 1.0) for zt in z[:, j]]
            assert spikes[:, j].tolist() == ref and u[j] == s.u


class TestTmnStep:
    def test_zero_input(self):
        assert run_steps([0, 0, 0], TmnConfig(horizon=3)) == ([0, 0, 0], 0.0)

    def test_constant_06(self):
        spikes, u = run_steps([0.6] * 3, TmnConfig(horizon=3))
        assert spikes == [1, 0, 0] and u == pytest.approx(0.2)

    def test_negative_correction(self):
        spikes, u = run_steps([0.55, 0, 0], TmnConfig(horizon=3))
        assert spikes == [1, -1, 0] and u == pytest.approx(0.2)

    def test_precharge_scaling(self):
        cfg = TmnConfig(1.0, 0.5, precharge=1, horizon=3)
        assert cfg.predictive_threshold == 1.0 and cfg.reset_amount == 2.0
        assert run_steps([0.6] * 3, cfg)[0] == [0, 1, 0]

    def test_past_horizon(self):
        cfg = TmnConfig(horizon=2)
        s = TmnState()
        tmn_step(s, 0.1, cfg)
        tmn_step(s, 0.1, cfg)
        with pytest.raises(NeuronStateError):
            tmn_step(s, 0.1, cfg)
        s.reset()
        tmn_step(s, 0.1, cfg)

    def test_boundary_ties_fire(self):
        assert run_steps([0.5], TmnConfig(horizon=1))[0] == [1]
        assert run_steps([-0.5], TmnConfig(horizon=1))[0] == [-1]

    @pytest.mark.parametrize("kw", [dict(v_th=0), dict(alpha=0), dict(alpha=1.5), dict(horizon=0), dict(precharge=3, horizon=3)])
    def test_config_rejects(self, kw):
        with pytest.raises(ValueError):
            TmnConfig(**kw)

    def test_gate_suppresses_without_reset(self):
        spikes, u = run_steps([-0.6, 0, 0], TmnConfig(horizon=3, negative_gate=True))
        assert spikes == [0, 0, 0] and u == pytest.approx(-2.4)


class TestTmnForward:
    def test_zero_frames(self):
        out = tmn_forward(np.zeros((4, 3, 2)), TmnConfig(horizon=4))
        assert not out.spikes.any() and not out.residual.any()

    def test_ragged(self):
        with pytest.raises(ShapeError):
            tmn_forward([np.zeros(2), np.zeros(3)], TmnConfig(horizon=2))

    def test_wrong_length(self):
        with pytest.raises(ShapeError):
            tmn_forward(np.zeros((3, 2)), TmnConfig(horizon=4))

    def test_per_element_threshold(self):
        v = np.array([1.0, 2.0])
        out = tmn_forward(np.full((3, 2), 0.6), TmnConfig(horizon=3), v_th=v)
        assert out.spikes[:, 0].tolist() == scalar_tmn([0.6] * 3, 1.0)[0]
        assert out.spikes[:, 1].tolist() == scalar_tmn([0.6] * 3, 2.0)[0]

    def test_record(self):
        out = tmn_forward(np.full((3, 1), 0.6), TmnConfig(horizon=3), record=True)
        np.testing.assert_allclose(out.membranes[:, 0], [0.6 - 1.0, -0.2, 0.2], atol=1e-12)
        np.testing.assert_allclose(out.membranes[-1], out.residual)

    @settings(max_examples=150, deadline=None)
    @given(z=seqs, alpha=st.floats(0.05, 1.0), P=st.integers(0, 3), gate=st.booleans())
    def test_vectorized_matches_reference_loop(self, z, alpha, P, gate):
        T = len(z)
        P = min(P, T - 1)
        cfg = TmnConfig(1.0, alpha, P, T, gate)
        out = tmn_forward(np.array(z)[:, None], cfg)
        ref_s, ref_u = scalar_tmn(z, 1.0, alpha, P, gate)
        assert out.spikes[:, 0].tolist() == ref_s
        assert run_steps(z, cfg)[0] == ref_s
        assert out.residual[0] == pytest.approx(ref_u, rel=1e-12, abs=1e-12)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(z=seqs, P=st.integers(0, 3), gate=st.booleans())
    def test_ternary_and_silent_precharge(self, z, P, gate):
        P = min(P, len(z) - 1)
        out = tmn_forward(np.array(z), TmnConfig(1.0, 0.5, P, len(z), gate))
        assert set(np.unique(out.spikes)) <= {-1, 0, 1}
        assert not out.spikes[:P].any()
        SpikeTrain(out.spikes, 1.0, P)

    @settings(max_examples=200, deadline=None)
    @given(z=seqs, v_th=st.floats(0.1, 10), P=st.integers(0, 3))
    def test_residual_identity(self, z, v_th, P):
        T = len(z)
        P = min(P, T - 1)
        zz = np.array(z) * v_th
        out = tmn_forward(zz, TmnConfig(v_th, 0.5, P, T))
        ref = direct_weighted_integrate(zz, v_th, out.spikes, P)
        assert abs(out.residual - ref) <= 1e-9 * max(abs(ref), v_th)

    @settings(max_examples=300, deadline=None)
    @given(z=seqs, a1=st.floats(0.05, 1.0), a2=st.floats(0.05, 1.0), P=st.integers(0, 2))
    def test_monotone_threshold(self, z, a1, a2, P):
        lo, hi = sorted((a1, a2))
        T = len(z)
        P = min(P, T - 1)

        def first_pos(alpha):
            s = tmn_forward(np.array(z), TmnConfig(1.0, alpha, P, T)).spikes
            hits = np.flatnonzero(s == 1)
            return hits[0] if len(hits) else T

        assert first_pos(lo) <= first_pos(hi)

    @settings(max_examples=300, deadline=None)
    @given(z=seqs, P=st.integers(0, 2))
    def test_gate_soundness(self, z, P):
        T = len(z)
        P = min(P, T - 1)
        s = tmn_forward(np.array(z), TmnConfig(1.0, 0.5, P, T, True)).spikes
        weights = 2.0 ** np.arange(T - 1, -1, -1)
        assert weights @ s >= 0


class TestDirectIntegrate:
    def test_zero(self):
        assert direct_weighted_integrate(np.zeros(4), 1.0, np.zeros(4)) == 0.0

    def test_single_step(self):
        assert direct_weighted_integrate([0.7], 1.0, [1]) == 0.7 - 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            direct_weighted_integrate(np.zeros(3), 1.0, np.zeros(4))


class TestSpikeTrain:
    def test_rejects_non_ternary(self):
        with pytest.raises(ValueError):
            SpikeTrain([2, 0], 1.0)

    def test_rejects_precharge_spike(self):
        with pytest.raises(ValueError):
            SpikeTrain([1, 0, 0], 1.0, precharge=1)

    def test_first_nonzero(self):
        assert SpikeTrain([0, -1, 1], 1.0).first_nonzero() == -1
        assert SpikeTrain([0, 0], 1.0).first_nonzero() == 0


class TestFixedPoint:
    def test_zero(self):
        fxp = FixedPointParams(8, 16)
        st_ = FixedTmnState()
        assert tmn_step_fixed(st_, 0, TmnConfig(horizon=3), fxp) == 0
        assert st_.u == 0 and st_.t == 1

    def test_hand_example(self):
        fxp = FixedPointParams(8, 16)
        spikes, u, sat = tmn_forward_fixed([154] * 3, TmnConfig(horizon=3), fxp)
        assert spikes.tolist() == [1, 0, 0] and not sat
        assert fxp.to_float(u) == pytest.approx(0.2, abs=3 * 2**-8 * 4)

    def test_doubling_is_shift(self):
        fxp = FixedPointParams(4, 16)
        st_ = FixedTmnState(u=3, t=0)
        tmn_step_fixed(st_, 0, TmnConfig(horizon=2, precharge=1), fxp)
        assert st_.u == 6

    def test_saturation_flag(self):
        fxp = FixedPointParams(4, 8)
        cfg = TmnConfig(1.0, 0.5, precharge=3, horizon=4)
        _, u, sat = tmn_forward_fixed([100] * 4, cfg, fxp)
        assert sat and u <= fxp.hi

    def test_word_too_small(self):
        with pytest.raises(ValueError):
            FixedPointParams(8, 10)

    def test_input_out_of_range(self):
        with pytest.raises(OverflowError):
            tmn_step_fixed(FixedTmnState(), 1 << 20, TmnConfig(), FixedPointParams(4, 16))

    def test_inexact_threshold(self):
        with pytest.raises(ValueError):
            tmn_forward_fixed([0], TmnConfig(v_th=0.1, horizon=1), FixedPointParams(4, 16))

    @settings(max_examples=200, deadline=None)
    @given(
        q=st.lists(st.integers(-4096, 4096), min_size=1, max_size=10),
        P=st.integers(0, 2),
        gate=st.booleans(),
        alpha=st.sampled_from([0.25, 0.5, 0.75, 1.0, 0.3]),
    )
    def test_matches_float(self, q, P, gate, alpha):
        fxp = FixedPointParams(12, 32)
        T = len(q)
        cfg = TmnConfig(1.0, alpha, min(P, T - 1), T, gate)
        spikes, u, sat = tmn_forward_fixed(q, cfg, fxp)
        out = tmn_forward(np.array(q) / 4096.0, cfg)
        if not sat:
            assert spikes.tolist() == out.spikes.tolist()
            assert fxp.to_float(u) == out.residual
