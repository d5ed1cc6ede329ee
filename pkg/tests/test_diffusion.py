import numpy as np
import pytest

from toonpipe.diffusion import (
    NoiseSchedule,
    OraclePredictor,
    TargetPredictor,
    ZeroPredictor,
    ddim_step,
    make_linear_schedule,
    q_sample,
    sampling_steps,
    stochastic_inversion,
    synthesize,
)
from toonpipe.imagecore import Image, Rng, clamp_to_image


def random_content(seed, size=16):
    return Image(Rng(seed).uniform((size, size, 3)))


class TestSchedule:
    def test_single_step(self):
        s = make_linear_schedule(1, 0.1, 0.1)
        assert s.alpha_bar[0] == 1.0
        assert abs(s.alpha_bar[1] - 0.9) < 1e-15

    def test_terminal_value_t1000(self):
        # frozen from the double-precision product; log-sum oracle agrees
        s = make_linear_schedule(1000, 1e-4, 0.02)
        oracle = np.exp(np.sum(np.log1p(-s.beta[1:])))
        assert abs(s.alpha_bar[1000] - oracle) / oracle < 1e-7
        assert abs(s.alpha_bar[1000] - 4.0358297654e-05) / 4.0358297654e-05 < 1e-7

    def test_alpha_bar_strictly_decreasing(self):
        s = make_linear_schedule(200, 1e-4, 0.05)
        assert np.all(np.diff(s.alpha_bar) < 0)

    def test_beta_endpoints_inclusive(self):
        s = make_linear_schedule(10, 0.001, 0.02)
        assert s.beta[1] == 0.001 and s.beta[10] == 0.02
        assert np.all(np.diff(s.beta[1:]) >= 0)

    @pytest.mark.parametrize("args", [(0, 0.1, 0.2), (5, 0.0, 0.1), (5, 0.2, 0.1), (5, 0.1, 1.0)])
    def test_validation(self, args):
        with pytest.raises(ValueError):
            make_linear_schedule(*args)

    def test_json_round_trip_bit_exact(self):
        s = make_linear_schedule(50, 1e-4, 0.02)
        s2 = NoiseSchedule.from_json(s.to_json())
        assert np.array_equal(s.alpha_bar, s2.alpha_bar)
        assert np.array_equal(s.beta, s2.beta)

    def test_json_unknown_kind(self):
        with pytest.raises(ValueError):
            NoiseSchedule.from_json('{"T": 5, "beta_start": 0.1, "beta_end": 0.1, "kind": "cosine"}')


class TestQSample:
    def test_zero_noise(self):
        s = make_linear_schedule(50)
        x0 = random_content(0).to_raster()
        xt = q_sample(x0, 20, np.zeros_like(x0), s)
        assert np.allclose(xt, np.sqrt(s.alpha_bar[20]) * x0)

    def test_zero_signal(self):
        s = make_linear_schedule(50)
        eps = Rng(1).gaussian((8, 8, 3))
        xt = q_sample(np.zeros((8, 8, 3)), 30, eps, s)
        assert np.allclose(xt, np.sqrt(1 - s.alpha_bar[30]) * eps)

    def test_terminal_step_is_nearly_pure_noise(self):
        s = make_linear_schedule(1000, 1e-4, 0.02)
        x0 = random_content(2).to_raster()
        eps = Rng(3).gaussian(x0.shape)
        xt = q_sample(x0, 1000, eps, s)
        assert np.linalg.norm(xt - eps) < 0.01 * np.linalg.norm(eps)

    def test_t_out_of_range(self):
        s = make_linear_schedule(50)
        x = np.zeros((4, 4, 3))
        with pytest.raises(ValueError):
            q_sample(x, 0, x, s)
        with pytest.raises(ValueError):
            q_sample(x, 51, x, s)

    def test_shape_mismatch(self):
        s = make_linear_schedule(50)
        with pytest.raises(ValueError):
            q_sample(np.zeros((4, 4, 3)), 1, np.zeros((4, 5, 3)), s)


class TestDdimStep:
    def test_exact_inversion_to_zero(self):
        s = make_linear_schedule(50)
        x0 = random_content(4).to_raster()
        eps = Rng(5).gaussian(x0.shape)
        xt = q_sample(x0, 40, eps, s)
        back = ddim_step(xt, eps, 40, 0, s)
        assert np.abs(back - x0).max() < 1e-6

    def test_zero_noise_rescales(self):
        s = make_linear_schedule(50)
        x0 = random_content(6).to_raster()
        xt = np.sqrt(s.alpha_bar[30]) * x0
        out = ddim_step(xt, np.zeros_like(x0), 30, 10, s)
        assert np.allclose(out, np.sqrt(s.alpha_bar[10]) * x0)

    def test_two_step_chain_reconstructs(self):
        s = make_linear_schedule(1000, 1e-4, 0.02)
        x0 = random_content(7).to_raster()
        eps = Rng(8).gaussian(x0.shape)
        x = q_sample(x0, 1000, eps, s)
        x = ddim_step(x, eps, 1000, 500, s)
        x = ddim_step(x, eps, 500, 0, s)
        assert np.abs(x - x0).max() < 1e-5

    def test_order_violation(self):
        s = make_linear_schedule(50)
        x = np.zeros((4, 4, 3))
        with pytest.raises(ValueError):
            ddim_step(x, x, 10, 10, s)
        with pytest.raises(ValueError):
            ddim_step(x, x, 10, 20, s)

    @pytest.mark.parametrize("seed", range(5))
    def test_forward_backward_consistency(self, seed):
        s = make_linear_schedule(50)
        rng = Rng(seed)
        x0 = rng.gaussian((6, 6, 3))
        eps = rng.gaussian((6, 6, 3))
        t = 1 + int(rng.uniform(()) * 50)
        assert np.abs(ddim_step(q_sample(x0, t, eps, s), eps, t, 0, s) - x0).max() < 1e-10


class TestStochasticInversion:
    def test_oracle_predictor_reproduces_draw(self):
        s = make_linear_schedule(50)
        content = random_content(9)
        rng = Rng(10)
        eps = Rng(10).gaussian((16, 16, 3))  # same stream the op will draw
        x_init, eps_pred = stochastic_inversion(content, 30, s, OraclePredictor(eps), rng)
        assert np.array_equal(eps_pred, eps)
        assert np.allclose(x_init, q_sample(content.to_raster(), 30, eps, s))

    def test_zero_predictor(self):
        s = make_linear_schedule(50)
        content = random_content(11)
        x_init, eps_pred = stochastic_inversion(content, 25, s, ZeroPredictor(), Rng(12))
        assert np.allclose(x_init, np.sqrt(s.alpha_bar[25]) * content.to_raster())
        assert not eps_pred.any()

    def test_t_star_out_of_range(self):
        s = make_linear_schedule(50)
        with pytest.raises(ValueError):
            stochastic_inversion(random_content(13), 0, s, ZeroPredictor(), Rng(0))

    @pytest.mark.parametrize("seed", range(3))
    @pytest.mark.parametrize("t_star", [15, 30, 50])
    def test_round_trip_recovers_content(self, seed, t_star):
        # the module's flagship oracle test: invert, then synthesize with the
        # predictor that knows the drawn noise
        s = make_linear_schedule(50)
        content = random_content(seed)
        eps = Rng(seed + 40).gaussian((16, 16, 3))
        x_init, _ = stochastic_inversion(content, t_star, s, OraclePredictor(eps), Rng(seed + 40))
        out = synthesize(x_init, None, OraclePredictor(eps), s, sampling_steps(t_star, 5))
        assert np.abs(out.data - content.data).max() < 1e-5


class TestSynthesize:
    def test_target_predictor_fixed_point(self):
        s = make_linear_schedule(50)
        g = random_content(14).to_raster()
        pred = TargetPredictor(g, s)
        x_init = Rng(15).gaussian(g.shape)
        for steps in ([50, 0], [50, 25, 0], sampling_steps(50, 25)):
            out = synthesize(x_init, None, pred, s, steps)
            assert np.abs(out.data - np.clip(g, 0, 1)).max() < 1e-4

    def test_step_count_independence(self):
        s = make_linear_schedule(50)
        g = random_content(16).to_raster()
        pred = TargetPredictor(g, s)
        x_init = Rng(17).gaussian(g.shape)
        outs = [
            synthesize(x_init, None, pred, s, sampling_steps(50, n)).data for n in (2, 5, 25)
        ]
        assert np.abs(outs[0] - outs[1]).max() < 1e-4
        assert np.abs(outs[1] - outs[2]).max() < 1e-4

    @pytest.mark.parametrize("steps", [[], [0], [10, 10, 0], [10, 20, 0], [5, 3], [100, 0]])
    def test_malformed_step_lists(self, steps):
        s = make_linear_schedule(50)
        x = np.zeros((4, 4, 3))
        with pytest.raises(ValueError):
            synthesize(x, None, ZeroPredictor(), s, steps)

    def test_perturbation_monotonicity(self):
        # reconstruction error grows with predictor error magnitude
        s = make_linear_schedule(50)
        content = random_content(18)
        delta = Rng(19).gaussian((16, 16, 3))
        errors = []
        for scale in (0.0, 0.01, 0.1):
            eps = Rng(20).gaussian((16, 16, 3))

            def perturbed(x_t, t, style=None, _eps=eps, _d=delta, _s=scale):
                return _eps + _s * _d

            x_init, _ = stochastic_inversion(content, 30, s, perturbed, Rng(20))
            out = synthesize(x_init, None, perturbed, s, sampling_steps(30, 5))
            errors.append(np.abs(out.data - content.data).max())
        assert errors[0] <= errors[1] <= errors[2]


class TestSamplingSteps:
    def test_endpoints_and_monotonicity(self):
        steps = sampling_steps(50, 5)
        assert steps[0] == 50 and steps[-1] == 0
        assert all(a > b for a, b in zip(steps, steps[1:]))

    def test_more_updates_than_range(self):
        assert sampling_steps(3, 10) == [3, 2, 1, 0]

    def test_validation(self):
        with pytest.raises(ValueError):
            sampling_steps(0, 5)
        with pytest.raises(ValueError):
            sampling_steps(10, 0)
