"""Training-loop contracts: scheme kernels, determinism, fast-path equality."""

import numpy as np
import pytest

from streamflow.coupling import EmpiricalSource, GaussianSource
from streamflow.errors import ConfigurationError, TrainingDivergenceError
from streamflow.gp_stream import ObservationSet, ZeroMean, _condition_arrays, path_stats
from streamflow.kernels import (
    DotProductDecreasing,
    DotProductIncreasing,
    Nugget,
    SquaredExponential,
    build_gram,
)
from streamflow.ode import IntegratorSpec, generate
from streamflow.trainer import (
    TrainConfig,
    draw_times,
    linear_path,
    make_scheme_kernel,
    train,
    train_multimarginal,
)
from streamflow.vector_field import Architecture, init_params


class TestSchemeKernels:
    def test_none_is_plain_se(self):
        k = make_scheme_kernel(1.0, 0.3, "none", 0.0)
        assert k == SquaredExponential(1.0, 0.3)

    def test_mapping(self):
        assert isinstance(make_scheme_kernel(1.0, 0.3, "constant", 0.2).members[1], Nugget)
        assert isinstance(make_scheme_kernel(1.0, 0.3, "increasing", 1.0).members[1],
                          DotProductIncreasing)
        assert isinstance(make_scheme_kernel(1.0, 0.3, "decreasing", 1.0).members[1],
                          DotProductDecreasing)

    def _sd_profile(self, scheme):
        # the skew of the conditional envelope flips direction for very
        # small length-scales; l >= 0.5 is the regime the schemes target
        kernel = make_scheme_kernel(1.0, 0.5, scheme, 1.0)
        bundle = build_gram(kernel, [0.0, 1.0])
        obs = ObservationSet(times=[0.0, 1.0], values=np.array([[-1.0], [1.0]]))
        rows = path_stats(bundle, ZeroMean(), obs, [0.05, 0.95])
        return rows[0][3], rows[1][3]  # sd_s at 0.05 and 0.95

    def test_increasing_variance_grows_toward_one(self):
        early, late = self._sd_profile("increasing")
        assert late > early

    def test_decreasing_variance_mirrors(self):
        early, late = self._sd_profile("decreasing")
        assert early > late


class TestFastPathEqualsGPPath:
    def test_linear_kernel_conditional_is_exact_interpolation(self):
        from streamflow.kernels import Linear

        bundle = build_gram(Linear(1.0, 1.0), [0.0, 1.0])
        rng = np.random.default_rng(0)
        values = rng.standard_normal((64, 2, 2)) * 2
        ts = rng.random(64)
        means, covs = _condition_arrays(bundle, ZeroMean(), values, ts)
        s_fast, sdot_fast = linear_path(ts, values[:, 0, :], values[:, 1, :])
        assert np.max(np.abs(means[:, 0, :] - s_fast)) <= 1e-12
        assert np.max(np.abs(means[:, 1, :] - sdot_fast)) <= 1e-12
        assert np.max(np.abs(covs)) <= 1e-12

    def test_i_cfm_equals_gp_with_linear_kernel(self):
        rng = np.random.default_rng(1)
        target = rng.standard_normal((40, 2))
        source = GaussianSource(2)
        base = dict(iterations=300, batch_size=32, seed=9)
        m_fast, trace_fast = train(TrainConfig(algorithm="i_cfm", **base),
                                   (source, target))
        m_gp, trace_gp = train(TrainConfig(algorithm="gp_i_cfm", kernel_type="linear",
                                           **base), (source, target))
        for (ia, la), (ib, lb) in zip(trace_fast, trace_gp):
            assert ia == ib
            assert la == pytest.approx(lb, abs=1e-9)
        np.testing.assert_allclose(m_fast.params, m_gp.params, atol=1e-9)


class TestTrainContracts:
    def test_degenerate_endpoints_learn_unit_velocity(self):
        cfg = TrainConfig(algorithm="i_cfm", iterations=2000, seed=1)
        model, _ = train(cfg, (EmpiricalSource(np.array([[0.0]])), np.array([[1.0]])))
        ts = np.linspace(0.05, 0.95, 9)
        vals = model(ts, ts[:, None])
        assert np.max(np.abs(vals - 1.0)) <= 0.05
        (end,) = generate(model, np.zeros((1, 1)), IntegratorSpec("rk4", n_steps=100),
                          [1.0])
        assert abs(end[0, 0] - 1.0) <= 0.05

    def test_zero_iterations_returns_initial_model(self):
        cfg = TrainConfig(algorithm="gp_i_cfm", iterations=0, seed=3)
        target = np.zeros((4, 2))
        model, trace = train(cfg, (GaussianSource(2), target))
        assert trace == []
        init_rng = np.random.default_rng(np.random.SeedSequence(3).spawn(4)[0])
        expected = init_params(Architecture(d=2), init_rng)
        np.testing.assert_array_equal(model.params, expected)

    def test_same_seed_bit_identical(self):
        rng = np.random.default_rng(2)
        target = rng.standard_normal((30, 2))
        cfg = TrainConfig(algorithm="gp_ot_cfm", iterations=200, batch_size=16, seed=5)
        a, _ = train(cfg, (GaussianSource(2), target))
        b, _ = train(cfg, (GaussianSource(2), target))
        np.testing.assert_array_equal(a.params, b.params)

    def test_divergence_reports_step(self):
        rng = np.random.default_rng(4)
        target = rng.standard_normal((10, 1)) * 1e150
        cfg = TrainConfig(algorithm="i_cfm", iterations=50, batch_size=4,
                          lr=1e160, seed=0)
        with pytest.raises(TrainingDivergenceError) as err:
            with np.errstate(all="ignore"):
                train(cfg, (GaussianSource(1), target))
        assert err.value.step is not None and 0 < err.value.step < 50

    def test_loss_trace_recorded_every_100(self):
        cfg = TrainConfig(algorithm="i_cfm", iterations=350, batch_size=8, seed=0)
        _, trace = train(cfg, (GaussianSource(2), np.zeros((4, 2))))
        assert [it for it, _ in trace] == [0, 100, 200, 300]

    def test_smoothed_loss_non_increasing(self):
        rng = np.random.default_rng(6)
        target = rng.standard_normal((100, 2)) * 0.5 + np.array([3.0, -3.0])
        cfg = TrainConfig(algorithm="gp_i_cfm", iterations=2000, batch_size=64, seed=7)
        _, trace = train(cfg, (GaussianSource(2), target))
        losses = [l for _, l in trace]
        first_window = np.mean(losses[:5])  # 500 iterations at one record per 100
        final_window = np.mean(losses[-5:])
        assert final_window <= first_window

    def test_source_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            train(TrainConfig(algorithm="i_cfm", iterations=1),
                  (GaussianSource(3), np.zeros((4, 2))))


class TestTimeSampling:
    def test_per_row_uniformity_kolmogorov_smirnov(self):
        n = 100_000
        ts = draw_times(np.random.default_rng(8), n)
        sorted_t = np.sort(ts)
        grid = np.arange(1, n + 1) / n
        ks = np.max(np.maximum(np.abs(grid - sorted_t),
                               np.abs(sorted_t - (np.arange(n) / n))))
        assert ks <= 1.6276 / np.sqrt(n)  # 1% critical value

    def test_per_batch_mode_shares_one_draw(self):
        ts = draw_times(np.random.default_rng(9), 64, per_batch=True)
        assert np.all(ts == ts[0])


class TestMultimarginal:
    def test_two_slices_reduce_to_train(self):
        rng = np.random.default_rng(10)
        target = rng.standard_normal((25, 2))
        cfg = TrainConfig(algorithm="gp_i_cfm", iterations=150, batch_size=16, seed=12)
        direct, trace_a = train(cfg, (GaussianSource(2), target))
        via_slices, trace_b = train_multimarginal(
            cfg, [GaussianSource(2), target], [None, np.arange(25)], (0.0, 1.0)
        )
        np.testing.assert_array_equal(direct.params, via_slices.params)
        assert trace_a == trace_b

    def test_three_slice_model_trains_and_predicts_everywhere(self):
        from streamflow.datasets import DatasetSpec, SLICE_TIMES, generate as gen_ds

        train_slices, _ = gen_ds(DatasetSpec("crossing", n_train=40, n_test=10, seed=1))
        cfg = TrainConfig(algorithm="gp_i_cfm", iterations=200, batch_size=16, seed=2)
        model, _ = train_multimarginal(cfg, train_slices,
                                       [np.arange(40)] * 3, SLICE_TIMES)
        out = model(np.full(5, 0.25), np.zeros((5, 2)))
        assert out.shape == (5, 2) and np.isfinite(out).all()

    def test_covariate_mode_feeds_slice_zero(self):
        from streamflow.datasets import DatasetSpec, SLICE_TIMES, generate as gen_ds

        train_slices, _ = gen_ds(DatasetSpec("crossing", n_train=30, n_test=10, seed=3))
        cfg = TrainConfig(algorithm="gp_i_cfm", covariate_mode="x0", iterations=100,
                          batch_size=8, seed=4)
        model, _ = train_multimarginal(cfg, train_slices, [np.arange(30)] * 3,
                                       SLICE_TIMES)
        assert model.arch.d_c == 2
        out = model(np.full(3, 0.5), np.zeros((3, 2)), np.zeros((3, 2)))
        assert out.shape == (3, 2)

    def test_ot_with_three_slices_rejected(self):
        cfg = TrainConfig(algorithm="gp_ot_cfm", iterations=1)
        with pytest.raises(ConfigurationError):
            train_multimarginal(cfg, [GaussianSource(2), np.zeros((4, 2)),
                                      np.zeros((4, 2))],
                                [None, np.arange(4), np.arange(4)], (0.0, 0.5, 1.0))


class TestConfigValidation:
    def test_unknown_algorithm(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(algorithm="diffusion")

    def test_unknown_scheme(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(scheme="ramp")

    def test_scheme_requires_se(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(kernel_type="linear", scheme="constant")
