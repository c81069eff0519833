import numpy as np
import pytest

from qns1d.model import (
    DomainError,
    ModelParams,
    NumericalBlowupError,
    State,
    cutoff_phi,
    deterministic_rhs,
    quantum_identity_residual,
    rhs_psi,
    rhs_u_terms,
    rhs_u_deterministic,
    w2inf_norm,
)
from qns1d.oracle import trig_eval
from qns1d.spectral import RealField, TorusGrid, UsageError, project, transform_forward

from conftest import band_limited, oracle_mode_coefficients


def make_state(grid, psi_values, u_values, t=0.0):
    return State(project(transform_forward(psi_values, grid), grid),
                 project(transform_forward(u_values, grid), grid), t)


class TestModelParams:
    def test_regime_flag(self):
        assert ModelParams(gamma=1.5, alpha=0.5).global_regularity_regime
        assert not ModelParams(gamma=1.5, alpha=0.6).global_regularity_regime

    @pytest.mark.parametrize("kwargs", [
        dict(gamma=1.0, alpha=0.5),
        dict(gamma=1.5, alpha=-0.1),
        dict(gamma=1.5, alpha=0.5, cutoff_radius=0.0),
        dict(gamma=1.5, alpha=0.5, monitor_order=3),
    ])
    def test_validation(self, kwargs):
        with pytest.raises(DomainError):
            ModelParams(**kwargs)


class TestCutoff:
    def test_plateau_values(self):
        for radius in (1.0, 3.5, 10.0):
            assert cutoff_phi(0.5 * radius, radius) == 1.0
            assert cutoff_phi(radius, radius) == 1.0
            assert cutoff_phi(radius + 1.0, radius) == 0.0
            assert cutoff_phi(radius + 5.0, radius) == 0.0

    def test_bridge_monotone_dense_sampling(self):
        radius = 2.0
        ys = np.linspace(radius, radius + 1.0, 100)
        vals = [cutoff_phi(y, radius) for y in ys]
        assert vals[0] == 1.0 and vals[-1] == 0.0
        assert 0.0 < cutoff_phi(radius + 0.5, radius) < 1.0
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_bridge_c2_endpoints(self):
        # first and second divided differences vanish at both plateau edges
        radius, h = 2.0, 1e-4
        for edge in (radius, radius + 1.0):
            d1 = (cutoff_phi(edge + h, radius) - cutoff_phi(max(edge - h, 0), radius)) / (2 * h)
            d2 = (cutoff_phi(edge + h, radius) - 2 * cutoff_phi(edge, radius)
                  + cutoff_phi(max(edge - h, 0), radius)) / h**2
            assert abs(d1) < 1e-6 and abs(d2) < 1e-2

    def test_negative_argument(self):
        with pytest.raises(UsageError):
            cutoff_phi(-0.1, 1.0)


class TestW2Inf:
    def test_constant(self, grid64):
        f = transform_forward(np.full(64, -3.25), grid64)
        assert w2inf_norm(f, grid64) == pytest.approx(3.25)

    def test_harmonic_second_derivative_dominates(self, grid64):
        f = transform_forward(np.sin(2 * np.pi * grid64.x), grid64)
        assert w2inf_norm(f, grid64) == pytest.approx((2 * np.pi) ** 2, rel=1e-6)

    def test_matches_oversampled_brute_force(self, grid64, rng):
        # oracle: direct trigonometric summation on the 8x finer grid
        f = band_limited(grid64, rng)
        x_fine = np.arange(8 * 64) / (8 * 64)
        brute = max(np.max(np.abs(trig_eval(f, grid64, x_fine, order=o)))
                    for o in (0, 1, 2))
        assert w2inf_norm(f, grid64) == pytest.approx(brute, rel=1e-6)


class TestRhsPsi:
    def test_zero_velocity(self, grid64):
        st = make_state(grid64, 0.3 * np.cos(2 * np.pi * grid64.x), np.zeros(64))
        params = ModelParams(gamma=1.5, alpha=0.5, cutoff_radius=100.0)
        out = rhs_psi(st, params, grid64)
        assert np.max(np.abs(out.physical)) == 0.0

    def test_constant_psi_divergence_only(self, grid64):
        st = make_state(grid64, np.full(64, 0.2), np.sin(2 * np.pi * grid64.x))
        params = ModelParams(gamma=1.5, alpha=0.5, cutoff_radius=100.0)
        out = rhs_psi(st, params, grid64)
        exact = -2 * np.pi * np.cos(2 * np.pi * grid64.x)
        assert np.max(np.abs(out.physical - exact)) < 1e-12

    def test_divergence_linearity(self, grid64):
        params = ModelParams(gamma=1.5, alpha=0.5, cutoff_radius=100.0)
        u = np.sin(2 * np.pi * grid64.x)
        st1 = make_state(grid64, np.full(64, 0.2), u)
        st2 = make_state(grid64, np.full(64, 0.2), 2 * u)
        r1 = rhs_psi(st1, params, grid64)
        r2 = rhs_psi(st2, params, grid64)
        assert np.max(np.abs(r2.physical - 2 * r1.physical)) < 1e-13

    def test_matches_term_by_term_quadrature(self, grid64):
        # oracle: pointwise transport and divergence on a fine grid by direct
        # trig summation, projected by direct quadrature inner products
        params = ModelParams(gamma=1.5, alpha=0.5, cutoff_radius=1e6)
        st = make_state(grid64, 0.1 * np.cos(2 * np.pi * grid64.x),
                        np.sin(2 * np.pi * grid64.x))
        out = rhs_psi(st, params, grid64)
        x_fine = np.arange(512) / 512
        transport = (trig_eval(st.u, grid64, x_fine)
                     * trig_eval(st.psi, grid64, x_fine, order=1))
        div = trig_eval(st.u, grid64, x_fine, order=1)
        c_transport = oracle_mode_coefficients(transport, grid64.m_modes)
        c_transport[grid64.dealias_cut + 1:] = 0.0
        c_div = oracle_mode_coefficients(div, grid64.m_modes)
        expected = -c_transport - c_div
        assert np.max(np.abs(out.spectral[: grid64.m_modes + 1] - expected)) < 1e-10

    def test_nonfinite_state_raises(self, grid64):
        bad = np.zeros(64)
        bad[3] = np.nan
        psi = RealField.from_physical(bad, grid64)
        st = State(psi, transform_forward(np.zeros(64), grid64), 1.25)
        with pytest.raises(NumericalBlowupError) as err:
            rhs_psi(st, ModelParams(gamma=1.5, alpha=0.5), grid64)
        assert err.value.time == 1.25


class TestRhsU:
    def test_constant_equilibrium(self, grid64):
        params = ModelParams(gamma=1.5, alpha=0.5, cutoff_radius=100.0)
        st = make_state(grid64, np.full(64, 0.4), np.zeros(64))
        out = rhs_u_deterministic(st, params, grid64)
        assert np.max(np.abs(out.physical)) < 1e-14

    def test_unit_density_reduction(self, grid64):
        # psi = 0, alpha = 1: viscosity term is u'' and advection is -u u'
        params = ModelParams(gamma=1.5, alpha=1.0, cutoff_radius=1e6)
        st = make_state(grid64, np.zeros(64), np.sin(2 * np.pi * grid64.x))
        terms = rhs_u_terms(st, params, grid64)
        visc_exact = -(2 * np.pi) ** 2 * np.sin(2 * np.pi * grid64.x)
        assert np.max(np.abs(terms["viscosity"].physical - visc_exact)) < 1e-10
        adv_exact = -np.pi * np.sin(4 * np.pi * grid64.x)
        assert np.max(np.abs(terms["advection"].physical - adv_exact)) < 1e-12
        # with psi identically zero the psi-driven terms vanish
        for name in ("pressure", "viscosity_gradient", "dispersion", "quantum"):
            assert np.max(np.abs(terms[name].physical)) < 1e-12

    def test_each_term_matches_quadrature_oracle(self, grid64, rng):
        params = ModelParams(gamma=1.5, alpha=0.5, cutoff_radius=1e6)
        psi = 0.15 * np.cos(2 * np.pi * grid64.x) + 0.05 * np.sin(4 * np.pi * grid64.x)
        u = 0.2 * np.sin(2 * np.pi * grid64.x) + 0.1 * np.cos(6 * np.pi * grid64.x)
        st = make_state(grid64, psi, u)
        terms = rhs_u_terms(st, params, grid64)

        x_fine = np.arange(1024) / 1024
        psi_f = trig_eval(st.psi, grid64, x_fine)
        dpsi_f = trig_eval(st.psi, grid64, x_fine, order=1)
        d2psi_f = trig_eval(st.psi, grid64, x_fine, order=2)
        d3psi_f = trig_eval(st.psi, grid64, x_fine, order=3)
        u_f = trig_eval(st.u, grid64, x_fine)
        du_f = trig_eval(st.u, grid64, x_fine, order=1)
        d2u_f = trig_eval(st.u, grid64, x_fine, order=2)

        gamma, alpha = params.gamma, params.alpha
        pointwise = {
            "advection": (-u_f * du_f, True),
            "pressure": (-gamma * np.exp((gamma - 1) * psi_f) * dpsi_f, False),
            "viscosity": (np.exp((alpha - 1) * psi_f) * d2u_f, False),
            "viscosity_gradient": (alpha * np.exp((alpha - 1) * psi_f) * dpsi_f * du_f, False),
            "dispersion": (0.5 * d3psi_f, False),
            "quantum": (0.5 * dpsi_f * d2psi_f, True),
        }
        for name, (values, masked) in pointwise.items():
            expected = oracle_mode_coefficients(values, grid64.m_modes)
            if masked:
                expected[grid64.dealias_cut + 1:] = 0.0
            got = terms[name].spectral[: grid64.m_modes + 1]
            scale = max(1.0, np.max(np.abs(expected)))
            assert np.max(np.abs(got - expected)) / scale < 1e-9, name

    def test_cutoff_inactivity_bitwise(self, grid64):
        psi = 0.1 * np.cos(2 * np.pi * grid64.x)
        u = 0.1 * np.sin(2 * np.pi * grid64.x)
        st = make_state(grid64, psi, u)
        norm = max(w2inf_norm(st.psi, grid64), w2inf_norm(st.u, grid64))
        r_small = ModelParams(gamma=1.5, alpha=0.5, cutoff_radius=2 * norm)
        r_large = ModelParams(gamma=1.5, alpha=0.5, cutoff_radius=4 * norm)
        a = deterministic_rhs(st, r_small, grid64)
        b = deterministic_rhs(st, r_large, grid64)
        assert a.cutoff_u == 1.0 and a.cutoff_psi == 1.0
        assert np.array_equal(a.dpsi_dt.spectral, b.dpsi_dt.spectral)
        assert np.array_equal(a.du_dt_deterministic.spectral,
                              b.du_dt_deterministic.spectral)

    def test_cutoff_factors_range(self, grid64):
        psi = 0.1 * np.cos(2 * np.pi * grid64.x)
        u = 0.5 * np.sin(2 * np.pi * grid64.x)
        st = make_state(grid64, psi, u)
        n_u = w2inf_norm(st.u, grid64)
        # place the u-norm inside the bridge, psi-norm under the plateau
        params = ModelParams(gamma=1.5, alpha=0.5, cutoff_radius=n_u - 0.5)
        pair = deterministic_rhs(st, params, grid64)
        assert 0.0 < pair.cutoff_u < 1.0
        assert pair.cutoff_psi == 1.0

    def test_saturated_cutoff_zeroes_truncated_terms(self, grid64):
        psi = 0.1 * np.cos(2 * np.pi * grid64.x)
        u = 0.5 * np.sin(2 * np.pi * grid64.x)
        st = make_state(grid64, psi, u)
        params = ModelParams(gamma=1.5, alpha=0.5, cutoff_radius=0.05)
        terms = rhs_u_terms(st, params, grid64)
        for name in ("advection", "pressure", "viscosity", "viscosity_gradient", "quantum"):
            assert np.max(np.abs(terms[name].physical)) == 0.0, name
        # the dispersion term is linear and carries no cut-off
        assert np.max(np.abs(terms["dispersion"].physical)) > 0.0

    def test_psi_clamp_raises(self, grid64):
        st = make_state(grid64, np.full(64, 60.0), np.zeros(64))
        with pytest.raises(NumericalBlowupError):
            rhs_u_deterministic(st, ModelParams(gamma=1.5, alpha=0.5), grid64)


class TestQuantumIdentity:
    def test_constant_density(self, grid256):
        rho = transform_forward(np.ones(256), grid256)
        assert quantum_identity_residual(rho, grid256) == 0.0

    def test_acceptance_densities(self):
        grid = TorusGrid(256, 64)
        for values in (2.0 + np.cos(2 * np.pi * grid.x),
                       np.exp(0.3 * np.sin(4 * np.pi * grid.x))):
            rho = transform_forward(values, grid)
            assert quantum_identity_residual(rho, grid) < 1e-7

    def test_spectral_decay_in_band(self):
        residuals = []
        for m in (16, 32, 64):
            g = TorusGrid(512, m)
            rho = transform_forward(1.0 + 0.95 * np.cos(2 * np.pi * g.x), g)
            residuals.append(quantum_identity_residual(rho, g))
        assert residuals[1] < residuals[0] / 20.0
        assert residuals[2] < residuals[1] / 20.0

    def test_nonpositive_density_rejected(self, grid64):
        rho = transform_forward(np.cos(2 * np.pi * grid64.x), grid64)
        with pytest.raises(DomainError):
            quantum_identity_residual(rho, grid64)
