import numpy as np
import pytest

from hystk.scenario import ScenarioError, generate_signal


class TestGenerateSignal:
    def test_ramp_two_samples(self):
        sig = generate_signal({"generator": "ramp", "t1": 1.0, "u0": 0.0, "u1": 2.0})
        assert np.array_equal(sig.times, [0.0, 1.0])
        assert np.array_equal(sig.points.ravel(), [0.0, 2.0])

    def test_triangle_wave_breakpoints(self):
        sig = generate_signal({"generator": "triangle-wave", "amplitude": 1.0,
                               "period": 2.0, "half_periods": 3})
        assert len(sig.times) == 4
        assert np.array_equal(sig.times, [0.0, 1.0, 2.0, 3.0])
        assert np.array_equal(sig.points.ravel(), [0.0, 1.0, 0.0, 1.0])

    def test_sinusoid_sample_count(self):
        sig = generate_signal({"generator": "sinusoid", "amplitude": 1.0,
                               "period": 2.0, "samples": 33, "duration": 4.0})
        assert len(sig.times) == 33
        assert np.allclose(sig.points.ravel(),
                           np.sin(2 * np.pi * sig.times / 2.0), atol=1e-12)

    def test_piecewise_linear_2d(self):
        sig = generate_signal({"generator": "piecewise-linear",
                               "times": [0.0, 1.0],
                               "points": [[0.1, 0.2], [0.3, 0.4]]})
        assert sig.dim == 2

    def test_unknown_generator_rejected(self):
        with pytest.raises(ScenarioError):
            generate_signal({"generator": "noise"})

    def test_bad_parameters_rejected(self):
        with pytest.raises(ScenarioError):
            generate_signal({"generator": "ramp", "t1": 0.0, "u0": 0.0, "u1": 1.0})
        with pytest.raises(ScenarioError):
            generate_signal({"generator": "triangle-wave", "amplitude": 1.0,
                             "period": -2.0, "half_periods": 3})
