import numpy as np
import pytest
from scipy.optimize import minimize

from resetsim import (ControlProtocol, DiscretizedBath, TransmonSpec,
                      build_influence, build_process_tensor, discretize,
                      equilibrium_displacements, population_series,
                      run_multilevel_reset, solve_multilevel_displacements)
from resetsim.dynamics import transmon_coupling_basis
from resetsim.errors import ConvergenceError, DomainError
from resetsim.oracles import fock_bruteforce_Pn
from resetsim.transmon import multilevel_energy
from resetsim.units import TWO_PI

WQ0 = TWO_PI*5.0
ALPHA_A = -TWO_PI*0.3


@pytest.fixture(scope="module")
def bath(ohmic_sd):
    return discretize(ohmic_sd, n_modes=300)


class TestDisplacementFixedPoint:
    def test_zero_anharmonicity_reduces_to_two_level(self, bath):
        spec = TransmonSpec(d=5, omega_q=WQ0, alpha_A=0.0)
        mp = solve_multilevel_displacements(spec, bath)
        eq = equilibrium_displacements(bath, WQ0)
        assert np.max(np.abs(mp.f - eq.f)) < 1e-14

    def test_zero_coupling(self):
        b = DiscretizedBath(omega=np.array([1.0, 2.0]), g=np.zeros(2),
                            scheme="x", omega_max=2.0)
        spec = TransmonSpec(d=5, omega_q=WQ0, alpha_A=ALPHA_A)
        mp = solve_multilevel_displacements(spec, b)
        assert mp.total_excitation == 0.0

    def test_fixed_point_identity(self, bath):
        spec = TransmonSpec(d=5, omega_q=WQ0, alpha_A=ALPHA_A)
        mp = solve_multilevel_displacements(spec, bath, tol=1e-13)
        S = mp.total_excitation
        expected = -bath.g/(2.0*(WQ0 + 3*ALPHA_A*S + bath.omega))
        assert np.max(np.abs(mp.f - expected)) < 1e-12

    def test_anharmonic_shift_direction(self, bath):
        # negative anharmonicity lowers the denominator -> slightly larger S
        spec = TransmonSpec(d=5, omega_q=WQ0, alpha_A=ALPHA_A)
        S_anh = solve_multilevel_displacements(spec, bath).total_excitation
        S_0 = equilibrium_displacements(bath, WQ0).total_excitation
        assert S_anh > S_0
        assert (S_anh - S_0)/S_0 < 0.01

    def test_against_direct_energy_minimization(self):
        # independent oracle: minimize the variational energy over the
        # displacements of a small bath (real displacements suffice)
        rng = np.random.default_rng(2)
        b = DiscretizedBath(omega=np.sort(TWO_PI*rng.uniform(2, 9, 6)),
                            g=TWO_PI*rng.uniform(0.05, 0.2, 6),
                            scheme="x", omega_max=TWO_PI*9)
        spec = TransmonSpec(d=5, omega_q=WQ0, alpha_A=ALPHA_A)
        mp = solve_multilevel_displacements(spec, b, tol=1e-13)

        def energy(fvec):
            return multilevel_energy(spec, b, fvec)

        res = minimize(energy, np.zeros(6), method="BFGS",
                       options={"gtol": 1e-12})
        assert np.max(np.abs(mp.f.real - res.x)) < 1e-6
        assert np.max(np.abs(mp.f.imag)) < 1e-12
        assert energy(mp.f.real) <= res.fun + 1e-14


class TestPopulationSeries:
    def test_vacuum(self):
        assert population_series(0.0, 0) == 1.0
        assert population_series(0.0, 3) == 0.0

    def test_leading_order(self):
        S = 1e-6
        assert population_series(S, 1) == pytest.approx(S, rel=1e-4)

    @pytest.mark.parametrize("S", [0.001, 0.01, 0.1])
    def test_matches_fock_oracle(self, S):
        for n in range(4):
            assert population_series(S, n) == pytest.approx(
                fock_bruteforce_Pn(S, n), abs=1e-10)

    def test_normalization(self):
        S = 0.05
        total = sum(population_series(S, n) for n in range(12))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_divergent_domain_rejected(self):
        with pytest.raises(ConvergenceError):
            population_series(0.6, 1)


class TestMultilevelRun:
    def test_dimension_mismatch(self, small_pt, small_protocol):
        spec = TransmonSpec(d=5, omega_q=WQ0, alpha_A=ALPHA_A)
        with pytest.raises(DomainError):
            run_multilevel_reset(small_pt, spec, small_protocol)

    def test_short_d3_run_population_sum(self, ohmic_sd):
        dt, n = 0.01, 50
        svals, _ = transmon_coupling_basis(3)
        inf = build_influence(ohmic_sd, dt, n, coupling_eigenvalues=svals,
                              memory_max_steps=40)
        pt = build_process_tensor(inf, svd_cutoff=3e-6)
        spec = TransmonSpec(d=3, omega_q=WQ0, alpha_A=ALPHA_A)
        prot = ControlProtocol.constant(WQ0, dt, n)
        run = run_multilevel_reset(pt, spec, prot)
        sums = run.populations.sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) < 1e-9
        # reset empties the initially mixed qubit manifold
        assert run.populations[-1, 1] < run.populations[0, 1]
