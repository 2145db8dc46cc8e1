import numpy as np
import pytest

from resetsim import (ControlProtocol, DiscretizedBath, SpectralDensity,
                      build_influence, build_process_tensor, contract,
                      eta_analytic, load_process_tensor, run_protocol,
                      save_process_tensor)
from resetsim.dynamics import qubit_propagator
from resetsim.errors import BondLimitError, DomainError
from resetsim.influence import QUBIT_COUPLING_EIGENVALUES, choose_memory_steps
from resetsim.units import TWO_PI

WC = TWO_PI*5.0
WQ0 = TWO_PI*5.0


def identity_propagators(n):
    g = np.eye(4, dtype=complex)
    return [(g, g)]*n


class TestInfluenceTensors:
    def test_default_coupling_is_half_sigma_z(self, ohmic_sd):
        inf = build_influence(ohmic_sd, 0.01, 10)
        assert np.allclose(inf.coupling_eigenvalues, [0.5, -0.5])
        assert np.allclose(QUBIT_COUPLING_EIGENVALUES, [0.5, -0.5])

    def test_damping_sign_convention(self, ohmic_sd):
        # the stored kernel is the cell double integral of the correlation
        # function: minus the second difference of eta, with Re >= 0 at lag 0
        inf = build_influence(ohmic_sd, 0.01, 10)
        assert inf.kernel[0].real > 0
        eta = eta_analytic(ohmic_sd, 0.01)
        assert inf.kernel[0] == pytest.approx(-eta, rel=1e-12)

    def test_zero_coupling_blocks_are_unit(self):
        sd = SpectralDensity(kind="ohmic-exponential", alpha=0.0, omega_c=WC)
        inf = build_influence(sd, 0.01, 8)
        assert np.allclose(inf.lag0_diagonal(), 1.0)
        assert np.allclose(inf.lag_block(3), 1.0)

    def test_lag0_modulus_bounded_by_one(self, ohmic_sd):
        inf = build_influence(ohmic_sd, 0.01, 8)
        assert inf.kernel[0].real >= 0
        assert np.all(np.abs(inf.lag0_diagonal()) <= 1.0 + 1e-15)

    def test_lag_blocks_approach_identity(self, ohmic_sd):
        inf = build_influence(ohmic_sd, 0.01, 400)
        early = np.max(np.abs(inf.lag_block(1) - 1.0))
        late = np.max(np.abs(inf.lag_block(min(380, inf.memory_steps)) - 1.0))
        assert late < 1e-3*early

    def test_memory_choice_clips_with_warning(self, ohmic_sd):
        with pytest.warns(UserWarning):
            build_influence(ohmic_sd, 0.01, 50)

    def test_memory_tail_criterion(self):
        kernel = np.array([1.0, 0.5, 1e-9, 1e-10], complex)
        K = choose_memory_steps(kernel, 4, memory_tol=1e-6)
        assert K == 2


class TestProcessTensorBuild:
    def test_decoupled_bath_bond_dims_one(self):
        sd = SpectralDensity(kind="ohmic-exponential", alpha=0.0, omega_c=WC)
        inf = build_influence(sd, 0.01, 30)
        pt = build_process_tensor(inf, svd_cutoff=1e-8)
        assert max(pt.bond_dims) == 1

    def test_dephasing_limit_exact(self, ohmic_sd):
        # zero splitting turns the model into exactly solvable dephasing:
        # the coherence in the coupling basis decays by exp(Re eta(t))
        n, dt = 120, 0.01
        inf = build_influence(ohmic_sd, dt, n)  # full memory
        pt = build_process_tensor(inf, svd_cutoff=1e-7, forward="gram")
        rho0 = np.array([[0.5, 0.5], [0.5, 0.5]], complex)
        traj = contract(pt, identity_propagators(n), rho0)
        got = np.array([r[0, 1].real for r in traj])
        expected = 0.5*np.exp(eta_analytic(ohmic_sd, dt*np.arange(n+1)).real)
        # the all-coherence amplitude is the worst-case observable for the
        # compression; the tolerance reflects its error floor at this cutoff,
        # and any sign or formula error would show up at the 1e-1 level
        assert np.max(np.abs(got - expected)) < 2e-3

    def test_trace_preserved_identity_contraction(self, small_pt):
        rho0 = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]], complex)
        traj = contract(small_pt, identity_propagators(small_pt.n_steps), rho0)
        traces = np.array([np.trace(r) for r in traj])
        assert np.max(np.abs(traces - 1.0)) < 1e-10

    def test_bond_limit_error_carries_step(self, ohmic_sd):
        inf = build_influence(ohmic_sd, 0.01, 60, memory_max_steps=40)
        with pytest.raises(BondLimitError) as err:
            build_process_tensor(inf, svd_cutoff=1e-9, max_bond=2)
        assert err.value.step is not None

    def test_truncation_error_bounds_cutoff_sweep(self, ohmic_sd):
        n, K = 120, 80
        inf = build_influence(ohmic_sd, 0.01, n, memory_max_steps=K)
        pt_a = build_process_tensor(inf, svd_cutoff=2e-6)
        pt_b = build_process_tensor(inf, svd_cutoff=1e-6)
        prot = ControlProtocol.constant(WQ0, 0.01, n)
        pa = run_protocol(pt_a, prot).p_plus[-1]
        pb = run_protocol(pt_b, prot).p_plus[-1]
        assert abs(pa - pb) < pt_a.truncation_error

    def test_memory_convergence(self, ohmic_sd):
        # +50% memory changes the final population by < 5%
        n = 300
        prot = ControlProtocol.constant(WQ0, 0.01, n)
        finals = []
        for K in (100, 150):
            inf = build_influence(ohmic_sd, 0.01, n, memory_max_steps=K)
            pt = build_process_tensor(inf, svd_cutoff=1e-6)
            finals.append(run_protocol(pt, prot).p_plus[-1])
        assert abs(finals[1] - finals[0]) < 0.05*abs(finals[1])

    def test_timestep_convergence(self, ohmic_sd):
        # halving dt changes the final population by < 5%
        t_f, t_mem = 2.0, 1.0
        finals = []
        for dt in (0.01, 0.005):
            n = int(round(t_f/dt))
            inf = build_influence(ohmic_sd, dt, n,
                                  memory_max_steps=int(round(t_mem/dt)))
            pt = build_process_tensor(inf, svd_cutoff=1e-6*(dt/0.01)**2)
            prot = ControlProtocol.constant(WQ0, dt, n)
            finals.append(run_protocol(pt, prot).p_plus[-1])
        assert abs(finals[1] - finals[0]) < 0.05*abs(finals[1])


class TestContract:
    def test_state_invariants_along_trajectory(self, small_pt, small_protocol):
        run = run_protocol(small_pt, small_protocol)
        for s in run.states:
            assert np.max(np.abs(s.rho - s.rho.conj().T)) < 1e-9
            assert abs(np.trace(s.rho) - 1.0) < 1e-9
            assert np.linalg.eigvalsh(s.rho).min() > -1e-7

    def test_length_mismatch_rejected(self, small_pt):
        rho0 = 0.5*np.eye(2, dtype=complex)
        with pytest.raises(DomainError):
            contract(small_pt, identity_propagators(3), rho0)

    def test_dimension_mismatch_rejected(self, small_pt):
        with pytest.raises(DomainError):
            contract(small_pt, identity_propagators(small_pt.n_steps),
                     np.eye(3, dtype=complex)/3.0)

    def test_single_mode_vs_exact_diagonalization(self):
        # discrete single-mode bath propagated by the process tensor agrees
        # with dense diagonalization of the joint model
        from resetsim.oracles import TruncatedBathModel, exact_small_bath
        wk, g = WC, TWO_PI*0.1
        dt, n = 0.01, 150
        bath = DiscretizedBath(omega=np.array([wk]), g=np.array([g]),
                               scheme="explicit", omega_max=wk)
        inf = build_influence(bath, dt, n)
        pt = build_process_tensor(inf, svd_cutoff=1e-7)
        prot = ControlProtocol.constant(WQ0, dt, n)
        run = run_protocol(pt, prot)
        model = TruncatedBathModel(omega=(wk,), g=(g,), fock_dim=6)
        _, p_exact, _ = exact_small_bath(model, prot)
        assert np.max(np.abs(run.p_plus - p_exact)) < 1e-3


class TestPersistence:
    def test_roundtrip_bit_exact(self, small_pt, small_protocol, tmp_path):
        path = tmp_path/"pt.bin"
        save_process_tensor(small_pt, path)
        loaded = load_process_tensor(path)
        for a, b in zip(small_pt.cores, loaded.cores):
            assert np.array_equal(a, b)
        assert loaded.memory_steps == small_pt.memory_steps
        assert loaded.closure_scale == small_pt.closure_scale
        r1 = run_protocol(small_pt, small_protocol).p_plus
        r2 = run_protocol(loaded, small_protocol).p_plus
        assert np.array_equal(r1, r2)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path/"junk.bin"
        path.write_bytes(b"NOPE" + b"\0"*32)
        with pytest.raises(DomainError):
            load_process_tensor(path)
