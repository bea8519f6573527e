import numpy as np
import pytest

from periodickf import (
    EngineInitFailed,
    ENGINES,
    MSingular,
    NotStationary,
    filter_series,
    gaussian_loglik,
    loglik_terms,
    rel_err,
    simulate,
    solve_dple,
)
from conftest import random_stationary_model


def simulated(seed, n=60, **dims):
    model = random_stationary_model(seed, **dims)
    _, y = simulate(model, n, seed=seed + 1000, start="stationary")
    return model, y


class TestScalarFilter:
    def test_hand_values(self, scalar_model):
        out = filter_series(scalar_model, np.array([2.0]))
        assert out.n == 1
        assert out.innovations[0, 0] == pytest.approx(2.0, abs=1e-15)
        assert out.Omega[0, 0, 0] == pytest.approx(2.0, abs=1e-15)
        assert out.K[0, 0, 0] == pytest.approx(0.5, abs=1e-15)
        assert np.array_equal(out.xhat[0], np.zeros(1))
        assert out.xhat[1, 0] == pytest.approx(0.5, abs=1e-15)
        want = -0.5 * (np.log(2 * np.pi) + np.log(2.0) + 4.0 / 2.0)
        assert out.loglik == pytest.approx(want, abs=1e-14)

    def test_empty_series(self, scalar_model):
        for engine in ENGINES:
            out = filter_series(scalar_model, np.empty((0, 1)),
                                engine=engine)
            assert out.n == 0 and out.loglik == 0.0
            assert gaussian_loglik(out) == 0.0
            assert out.innovations.shape == (0, 1)
            assert out.xhat.shape == (1, 1)


class TestEngineAgreement:
    @pytest.mark.parametrize("engine", ["chand31", "chand32", "chand-minv"])
    def test_outputs_match_kalman(self, engine):
        model, y = simulated(80, n=40)
        ref = filter_series(model, y, engine="kalman", init="stationary")
        out = filter_series(model, y, engine=engine, init="stationary")
        assert rel_err(out.innovations, ref.innovations) < 1e-9
        assert rel_err(out.Omega, ref.Omega) < 1e-9
        assert rel_err(out.K, ref.K) < 1e-9
        assert rel_err(out.xhat, ref.xhat) < 1e-9
        assert out.loglik == pytest.approx(ref.loglik, rel=1e-9, abs=1e-9)

    def test_eigen_fallback_start_matches_kalman(self):
        # a non-stationary start disqualifies both closed-form
        # factorizations; the eigen start must still track exactly
        model, y = simulated(81, n=30, r=4, S=2, m=1)
        Sigma1 = 2.0 * solve_dple(model)[0]
        ref = filter_series(model, y, engine="kalman", init="explicit",
                            xhat1=np.zeros(4), Sigma1=Sigma1)
        for engine in ("chand31", "chand32", "chand-minv"):
            out = filter_series(model, y, engine=engine, init="explicit",
                                xhat1=np.zeros(4), Sigma1=Sigma1)
            assert rel_err(out.innovations, ref.innovations) < 1e-9
            assert out.loglik == pytest.approx(ref.loglik, rel=1e-9)


class TestLoglik:
    def test_matches_direct_formula(self):
        model, y = simulated(82, n=25, r=3, S=2, m=2)
        out = filter_series(model, y, engine="kalman", init="stationary")
        total = 0.0
        for t in range(out.n):
            Om = out.Omega[t]
            e = out.innovations[t]
            sign, logdet = np.linalg.slogdet(Om)
            assert sign > 0
            total += -0.5 * (2 * np.log(2 * np.pi) + logdet
                             + e @ np.linalg.solve(Om, e))
        assert out.loglik == pytest.approx(total, rel=1e-12)
        assert gaussian_loglik(out) == pytest.approx(total, rel=1e-12)

    def test_terms_sum_to_total(self):
        model, y = simulated(83, n=17)
        out = filter_series(model, y, init="stationary")
        terms = loglik_terms(out)
        assert terms.shape == (17,)
        assert float(np.sum(terms)) == pytest.approx(out.loglik, rel=1e-13)

    def test_standardized_innovations_have_unit_variance(self):
        # chi-squared calibration of the whole simulate + filter chain:
        # e' Omega^{-1} e has mean m when the model is the truth
        model, y = simulated(84, n=2000, r=3, S=2, m=2)
        out = filter_series(model, y, engine="kalman", init="stationary")
        quads = [e @ np.linalg.solve(Om, e)
                 for e, Om in zip(out.innovations, out.Omega)]
        se = np.sqrt(2.0 * 2 / 2000)
        assert abs(np.mean(quads) - 2.0) < 4 * se


class TestInits:
    def test_zero_state_uses_stored_w1(self, scalar_model):
        out = filter_series(scalar_model, np.array([2.0]),
                            sigma_trace=True)
        assert out.sigma_trace[0][0, 0] == 1.0  # the fixture's W1

    def test_zero_state_falls_back_to_stationary(self):
        model, y = simulated(85, n=10)
        assert model.W1 is None
        out = filter_series(model, y, init="zero-state", sigma_trace=True)
        assert np.allclose(out.sigma_trace[0], solve_dple(model)[0],
                           atol=1e-12)

    def test_stationary_requires_stationary_model(self):
        model, y = simulated(86, n=5, r=2, S=1, m=1)
        model.F = [2.0 * f for f in model.F]
        with pytest.raises(NotStationary):
            filter_series(model, y, init="stationary")

    def test_explicit_requires_both_arguments(self):
        model, y = simulated(87, n=5, r=2)
        with pytest.raises(ValueError):
            filter_series(model, y, init="explicit", xhat1=np.zeros(2))
        with pytest.raises(ValueError):
            filter_series(model, y, init="explicit", Sigma1=np.eye(2))

    def test_explicit_validates_sigma1(self):
        model, y = simulated(88, n=5, r=2)
        x1 = np.zeros(2)
        with pytest.raises(ValueError):
            filter_series(model, y, init="explicit", xhat1=x1,
                          Sigma1=np.eye(3))
        with pytest.raises(ValueError):
            filter_series(model, y, init="explicit", xhat1=x1,
                          Sigma1=np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            filter_series(model, y, init="explicit", xhat1=x1,
                          Sigma1=-np.eye(2))

    def test_unknown_names_rejected(self):
        model, y = simulated(89, n=5)
        with pytest.raises(ValueError):
            filter_series(model, y, engine="riccati")
        with pytest.raises(ValueError):
            filter_series(model, y, init="diffuse")


class TestSigmaTrace:
    @pytest.mark.parametrize("engine", ["chand31", "chand32", "chand-minv"])
    def test_reconstruction_matches_kalman(self, engine):
        model, y = simulated(90, n=40)
        ref = filter_series(model, y, engine="kalman", init="stationary",
                            sigma_trace=True)
        out = filter_series(model, y, engine=engine, init="stationary",
                            sigma_trace=True)
        assert out.sigma_trace.shape == (40, model.r, model.r)
        worst = max(rel_err(a, b)
                    for a, b in zip(out.sigma_trace, ref.sigma_trace))
        assert worst < 1e-8

    def test_disabled_by_default(self):
        model, y = simulated(91, n=5)
        assert filter_series(model, y, init="stationary").sigma_trace is None


class TestObservationHandling:
    def test_flat_vector_accepted_for_scalar_output(self):
        model, y = simulated(92, n=12, m=1)
        out1 = filter_series(model, y, init="stationary")
        out2 = filter_series(model, y.ravel(), init="stationary")
        assert np.array_equal(out1.innovations, out2.innovations)

    def test_wrong_width_rejected(self):
        model, _ = simulated(93, n=5, m=2)
        with pytest.raises(ValueError):
            filter_series(model, np.zeros((5, 3)))
        with pytest.raises(ValueError):
            filter_series(model, np.zeros(5))

    def test_innovation_definition(self):
        model, y = simulated(94, n=20, m=2)
        out = filter_series(model, y, init="stationary")
        for t in range(1, 21):
            H = model.H[model.season(t) - 1]
            want = y[t - 1] - H.T @ out.xhat[t - 1]
            assert np.allclose(out.innovations[t - 1], want, atol=1e-12)


class TestEngineInitFailure:
    def test_singular_steady_start_reports_cause(self):
        # Q = 0 with S m >= r: W = 0, the steady-form middle factor is
        # exactly zero, and the inverse-form engine cannot start
        model = random_stationary_model(95, r=2, S=2, m=1)
        model.Q = [np.zeros_like(q) for q in model.Q]
        y = np.zeros((6, 1))
        with pytest.raises(EngineInitFailed) as info:
            filter_series(model, y, engine="chand-minv", init="stationary")
        assert isinstance(info.value.__cause__, MSingular)
        # the direct-form engines run fine on the same model
        out = filter_series(model, y, engine="chand31", init="stationary")
        ref = filter_series(model, y, engine="kalman", init="stationary")
        assert rel_err(out.Omega, ref.Omega) < 1e-12
