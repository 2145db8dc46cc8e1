import numpy as np
import pytest
from scipy.linalg import expm

from resetsim import (ControlProtocol, SpectralDensity, SystemState,
                      TransmonSpec, build_influence, build_process_tensor,
                      qubit_propagator, run_protocol, transmon_propagator)
from resetsim.dynamics import (GROUND_PROJECTOR, MINUS, SIGMA_X,
                               excited_population, qubit_step_generators,
                               su2_half_unitary, transmon_coupling_basis,
                               transmon_hamiltonian)
from resetsim.errors import DomainError
from resetsim.units import TWO_PI

WQ0 = TWO_PI*5.0


class TestQubitPropagator:
    def test_zero_frequency_is_identity(self):
        prop = qubit_propagator(0.0, 0.01)
        assert np.allclose(prop.first, np.eye(4))
        assert np.allclose(prop.second, np.eye(4))

    def test_small_dt_expansion(self):
        dt = 1e-7
        prop = qubit_propagator(WQ0, dt)
        assert np.max(np.abs(prop.first - np.eye(4))) < WQ0*dt

    def test_ground_state_is_stationary(self):
        prop = qubit_propagator(WQ0, 0.01)
        v = GROUND_PROJECTOR.reshape(4)
        out = (prop.first @ v)
        out = prop.second @ out
        assert np.allclose(out.reshape(2, 2), GROUND_PROJECTOR, atol=1e-14)

    def test_halves_compose_to_full_step(self):
        dt = 0.013
        prop = qubit_propagator(WQ0, dt)
        u_full = expm(-1j*(WQ0/2)*SIGMA_X*dt)
        g_full = np.kron(u_full, u_full.conj())
        assert np.allclose(prop.second @ prop.first, g_full, atol=1e-13)

    def test_invalid_dt(self):
        with pytest.raises(DomainError):
            qubit_propagator(WQ0, 0.0)


class TestStepGenerators:
    def test_derivative_matches_finite_difference(self):
        dt = 0.01
        for cy, cz in ((0.0, 0.0), (0.7, -1.1)):
            g, derivs = qubit_step_generators(WQ0, dt, c_y=cy, c_z=cz)
            h = 1e-6
            for k, delta in enumerate([(h, 0, 0), (0, h, 0), (0, 0, h)]):
                up = su2_half_unitary(WQ0 + delta[0], dt, cy + delta[1],
                                      cz + delta[2])
                dn = su2_half_unitary(WQ0 - delta[0], dt, cy - delta[1],
                                      cz - delta[2])
                gp = np.kron(up, up.conj())
                gm = np.kron(dn, dn.conj())
                fd = (gp - gm)/(2*h)
                assert np.max(np.abs(derivs[k] - fd)) < 1e-8


class TestTransmonPropagator:
    def test_two_level_reduction_matches_qubit(self, ohmic_sd):
        # a two-level ladder is the spin-boson model with relabeled axes:
        # populations agree with the qubit run at machine-level accuracy
        dt, n = 0.01, 60
        inf_q = build_influence(ohmic_sd, dt, n, memory_max_steps=40)
        pt_q = build_process_tensor(inf_q, svd_cutoff=1e-7)
        svals, _ = transmon_coupling_basis(2)
        inf_t = build_influence(ohmic_sd, dt, n, coupling_eigenvalues=svals,
                                memory_max_steps=40)
        pt_t = build_process_tensor(inf_t, svd_cutoff=1e-7)
        prot = ControlProtocol.constant(WQ0, dt, n)
        run_q = run_protocol(pt_q, prot)
        spec = TransmonSpec(d=2, omega_q=WQ0, alpha_A=-TWO_PI*0.3)
        run_t = run_protocol(pt_t, prot, transmon=spec)
        # qubit P_+ corresponds to the upper-level population P_1
        assert np.max(np.abs(run_q.p_plus - run_t.populations[:, 1])) < 1e-9

    def test_harmonic_ladder_spectrum(self):
        spec = TransmonSpec(d=6, omega_q=WQ0, alpha_A=0.0)
        H = transmon_hamiltonian(spec, WQ0)
        gaps = np.diff(np.diag(H))
        assert np.allclose(gaps, WQ0)

    def test_anharmonic_gaps(self):
        aA = -TWO_PI*0.3
        spec = TransmonSpec(d=4, omega_q=WQ0, alpha_A=aA)
        H = transmon_hamiltonian(spec, WQ0)
        gaps = np.diff(np.diag(H))
        assert gaps[0] == pytest.approx(WQ0)
        assert gaps[1] == pytest.approx(WQ0 + aA)

    def test_coupling_eigenbasis(self):
        svals, V = transmon_coupling_basis(5)
        a = np.diag(np.sqrt(np.arange(1, 5)), 1)
        x = 0.5*(a + a.conj().T)
        assert np.allclose(V @ np.diag(svals) @ V.conj().T, x, atol=1e-13)

    def test_dimension_mismatch_rejected(self, small_pt, small_protocol):
        spec = TransmonSpec(d=5, omega_q=WQ0, alpha_A=0.0)
        with pytest.raises(DomainError):
            run_protocol(small_pt, small_protocol, transmon=spec)


class TestRunProtocol:
    def test_decoupled_matches_closed_unitary(self):
        sd = SpectralDensity(kind="ohmic-exponential", alpha=0.0,
                             omega_c=TWO_PI*5.0)
        dt, n = 0.01, 40
        inf = build_influence(sd, dt, n)
        pt = build_process_tensor(inf, svd_cutoff=1e-8)
        prot = ControlProtocol.constant(WQ0, dt, n)
        rho0 = np.array([[0.8, 0.1 + 0.2j], [0.1 - 0.2j, 0.2]], complex)
        run = run_protocol(pt, prot, rho0=rho0)
        for k in (1, n//2, n):
            u = expm(-1j*(WQ0/2)*SIGMA_X*(k*dt))
            expected = u @ rho0 @ u.conj().T
            assert np.max(np.abs(run.states[k].rho - expected)) < 1e-12

    def test_decoupled_maximally_mixed_frozen(self):
        sd = SpectralDensity(kind="ohmic-exponential", alpha=0.0,
                             omega_c=TWO_PI*5.0)
        inf = build_influence(sd, 0.01, 30)
        pt = build_process_tensor(inf, svd_cutoff=1e-8)
        prot = ControlProtocol.constant(WQ0, 0.01, 30)
        run = run_protocol(pt, prot)
        assert np.allclose(run.p_plus, 0.5, atol=1e-12)

    def test_population_monotone_after_transient(self, small_pt, small_protocol):
        run = run_protocol(small_pt, small_protocol)
        start = int(round(0.3/small_pt.dt))
        diffs = np.diff(run.p_plus[start:])
        assert np.all(diffs < 1e-7)

    def test_protocol_length_mismatch(self, small_pt):
        prot = ControlProtocol.constant(WQ0, small_pt.dt, small_pt.n_steps + 5)
        with pytest.raises(DomainError):
            run_protocol(small_pt, prot)


class TestSystemState:
    def test_validation_passes_for_good_state(self):
        SystemState(rho=np.eye(2)/2).validate()

    def test_non_hermitian_rejected(self):
        s = SystemState(rho=np.array([[0.5, 0.1], [0.3, 0.5]], complex))
        with pytest.raises(DomainError):
            s.validate()

    def test_wrong_trace_rejected(self):
        s = SystemState(rho=np.eye(2, dtype=complex))
        with pytest.raises(DomainError):
            s.validate()

    def test_negative_state_rejected(self):
        s = SystemState(rho=np.diag([1.5, -0.5]).astype(complex))
        with pytest.raises(DomainError):
            s.validate()

    def test_excited_population_of_mixed(self):
        assert excited_population(np.eye(2)/2) == pytest.approx(0.5)
        plus = np.array([[0.5, 0.5], [0.5, 0.5]])
        assert excited_population(plus) == pytest.approx(1.0)


class TestControlProtocol:
    def test_bounds_enforced(self):
        with pytest.raises(DomainError):
            ControlProtocol(omega=np.array([TWO_PI*8.0]), dt=0.01)

    def test_times_and_duration(self):
        p = ControlProtocol.constant(WQ0, 0.01, 50)
        assert p.t_f == pytest.approx(0.5)
        assert p.times.size == 51
