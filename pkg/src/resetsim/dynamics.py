"""System propagators and end-to-end protocol runs.

Each timestep is a symmetric splitting: half a system step, the influence
weights of the slot, half a system step.  For a constant protocol the halves
merge, so the decoupled limit reproduces closed-system evolution exactly.

Propagators act on row-major vectorized density matrices, vec(rho)[a*dim+b] =
rho[a, b], in the eigenbasis of the system-bath coupling operator (for the
two-level system the coupling sigma_z/2 is already diagonal in the
computational basis; for the d-level transmon the (a+a^dag)/2 eigenbasis is
used internally and results are rotated back to the number basis).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .units import TWO_PI

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], complex)

# sigma_x eigenstates: |+> is the excited state of (omega_q/2) sigma_x
PLUS = np.array([1.0, 1.0], complex)/np.sqrt(2.0)
MINUS = np.array([1.0, -1.0], complex)/np.sqrt(2.0)
GROUND_PROJECTOR = np.outer(MINUS, MINUS.conj())


@dataclass
class ControlProtocol:
    """Per-step qubit angular frequencies with box bounds (rad/ns)."""

    omega: np.ndarray
    dt: float
    bounds: tuple = (TWO_PI*4.0, TWO_PI*7.0)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        if self.omega.ndim != 1 or self.omega.size == 0:
            raise DomainError("omega must be a non-empty 1-d sequence")
        if self.dt <= 0:
            raise DomainError("dt must be > 0")
        lo, hi = self.bounds
        if lo >= hi:
            raise DomainError("bounds must satisfy omega_min < omega_max")
        if np.any(self.omega < lo - 1e-12) or np.any(self.omega > hi + 1e-12):
            raise DomainError("protocol leaves the declared box bounds")

    @property
    def n_steps(self):
        return self.omega.size

    @property
    def t_f(self):
        return self.n_steps*self.dt

    @property
    def times(self):
        return self.dt*np.arange(self.n_steps + 1)

    @classmethod
    def constant(cls, omega0, dt, n_steps, bounds=(TWO_PI*4.0, TWO_PI*7.0)):
        return cls(omega=np.full(n_steps, float(omega0)), dt=dt, bounds=bounds)


@dataclass
class SystemState:
    """Density matrix of the truncated system."""

    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.ndim != 2 or self.rho.shape[0] != self.rho.shape[1]:
            raise DomainError("rho must be a square matrix")

    @property
    def dim(self):
        return self.rho.shape[0]

    def validate(self, herm_tol=1e-12, trace_tol=1e-12, psd_tol=1e-9):
        h = np.max(np.abs(self.rho - self.rho.conj().T))
        if h > herm_tol:
            raise DomainError(f"state not Hermitian to {herm_tol:g} (defect {h:.3e})")
        t = abs(np.trace(self.rho) - 1.0)
        if t > trace_tol:
            raise DomainError(f"state trace deviates by {t:.3e}")
        lmin = float(np.linalg.eigvalsh(0.5*(self.rho + self.rho.conj().T)).min())
        if lmin < -psd_tol:
            raise DomainError(f"state not positive semidefinite (min eig {lmin:.3e})")
        return self

    @classmethod
    def maximally_mixed(cls, dim=2):
        return cls(rho=np.eye(dim, dtype=complex)/dim)

    @classmethod
    def qubit_ground(cls):
        return cls(rho=GROUND_PROJECTOR.copy())


@dataclass(frozen=True)
class TransmonSpec:
    """Truncated anharmonic oscillator: d levels, fundamental frequency
    omega_q (rad/ns), constant anharmonicity alpha_A (rad/ns)."""

    d: int
    omega_q: float
    alpha_A: float

    def __post_init__(self):
        if self.d < 2:
            raise DomainError("need at least two levels")


@dataclass
class StepPropagator:
    """Symmetric-splitting halves of one step, as Liouville superoperators."""

    first: np.ndarray
    second: np.ndarray


def _half_superop(u):
    """vec(u rho u^dag) = kron(u, conj(u)) vec(rho) in row-major vec."""
    return np.kron(u, u.conj())


def su2_half_unitary(omega, dt, c_y=0.0, c_z=0.0):
    """exp(-i H dt/2) for H = (omega sx + c_y sy + c_z sz)/2, closed form."""
    lam = 0.5*np.sqrt(omega**2 + c_y**2 + c_z**2)
    tau = dt/2.0
    if lam == 0.0:
        return np.eye(2, dtype=complex)
    nvec = (0.5/lam)*np.array([omega, c_y, c_z])
    nsig = nvec[0]*SIGMA_X + nvec[1]*SIGMA_Y + nvec[2]*SIGMA_Z
    return np.cos(lam*tau)*np.eye(2) - 1j*np.sin(lam*tau)*nsig


def qubit_propagator(omega_q_n, dt, c_y=0.0, c_z=0.0):
    """Step propagator for H = (omega/2) sigma_x (+ optional sigma_y/z terms,
    kept behind explicit arguments for replication studies)."""
    if dt <= 0:
        raise DomainError("dt must be > 0")
    u = su2_half_unitary(omega_q_n, dt, c_y, c_z)
    g = _half_superop(u)
    return StepPropagator(first=g, second=g)


def qubit_step_generators(omega_q_n, dt, c_y=0.0, c_z=0.0):
    """Half-step superoperator and its derivatives w.r.t. (omega, c_y, c_z).

    The sigma_x-only case has a commuting generator so the derivative is the
    simple product rule; with y/z terms the Loewner (divided-difference)
    formula of the matrix exponential is used.  Returns (g, [dg_x, dg_y, dg_z]).
    """
    H = 0.5*(omega_q_n*SIGMA_X + c_y*SIGMA_Y + c_z*SIGMA_Z)
    tau = dt/2.0
    u = su2_half_unitary(omega_q_n, dt, c_y, c_z)
    g = _half_superop(u)
    derivs = []
    for dH in (0.5*SIGMA_X, 0.5*SIGMA_Y, 0.5*SIGMA_Z):
        du = _expm_derivative(H, dH, tau)
        derivs.append(np.kron(du, u.conj()) + np.kron(u, du.conj()))
    return g, derivs


def _expm_derivative(H, dH, tau):
    """d/ds exp(-i (H + s dH) tau) at s=0 via the eigenbasis divided-difference
    (Loewner) representation; exact for Hermitian H."""
    evals, V = np.linalg.eigh(H)
    f = np.exp(-1j*evals*tau)
    num = f[:, None] - f[None, :]
    den = evals[:, None] - evals[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.where(np.abs(den) > 1e-14, num/np.where(den == 0, 1.0, den),
                     -1j*tau*f[:, None])
    dHe = V.conj().T @ dH @ V
    return V @ (L*dHe) @ V.conj().T


def transmon_coupling_basis(d):
    """Eigen-decomposition of the coupling operator (a + a^dag)/2 at dim d.

    Returns (eigenvalues ascending, V) with columns of V the eigenvectors in
    the number basis; operators rotate as A_coupling = V^dag A_number V.
    """
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    x = 0.5*(a + a.conj().T)
    svals, V = np.linalg.eigh(x)
    return svals, V


def transmon_hamiltonian(spec, omega_q_n):
    """Number-basis H = omega a^dag a + (alpha_A/2) a^dag^2 a^2 (diagonal)."""
    n = np.arange(spec.d, dtype=float)
    return np.diag(omega_q_n*n + 0.5*spec.alpha_A*n*(n - 1.0))


def transmon_propagator(spec, omega_q_n, dt):
    """Step propagator for the truncated anharmonic ladder, expressed in the
    coupling eigenbasis used by d-level process tensors."""
    if dt <= 0:
        raise DomainError("dt must be > 0")
    _, V = transmon_coupling_basis(spec.d)
    phases = np.exp(-1j*np.diag(transmon_hamiltonian(spec, omega_q_n))*dt/2.0)
    u = V.conj().T @ (phases[:, None]*V)
    g = _half_superop(u)
    return StepPropagator(first=g, second=g)


def transmon_step_generator(spec, omega_q_n, dt):
    """Half-step superoperator and its omega-derivative (coupling basis).

    d/d omega of the ladder Hamiltonian is the number operator, which commutes
    with H, so the derivative is exact product form.
    """
    _, V = transmon_coupling_basis(spec.d)
    nvals = np.arange(spec.d, dtype=float)
    phases = np.exp(-1j*np.diag(transmon_hamiltonian(spec, omega_q_n))*dt/2.0)
    u = V.conj().T @ (phases[:, None]*V)
    du = V.conj().T @ ((-1j*(dt/2.0)*nvals*phases)[:, None]*V)
    g = _half_superop(u)
    dg = np.kron(du, u.conj()) + np.kron(u, du.conj())
    return g, dg


def build_propagators(protocol, transmon=None):
    """Per-step StepPropagator list for a protocol (qubit or transmon)."""
    if transmon is None:
        return [qubit_propagator(w, protocol.dt) for w in protocol.omega]
    return [transmon_propagator(transmon, w, protocol.dt) for w in protocol.omega]


def excited_population(rho):
    """P_+ = <+|rho|+> with |+> the upper sigma_x eigenstate."""
    return float(np.real(PLUS.conj() @ rho @ PLUS))


@dataclass
class RunResult:
    """Trajectory of a reset run."""

    times: np.ndarray
    states: list                       # SystemState per time, incl. t=0
    populations: np.ndarray            # qubit: P_+(t); transmon: [t, d] P_n(t)

    @property
    def p_plus(self):
        if self.populations.ndim == 1:
            return self.populations
        return self.populations[:, 1]

    @property
    def final_state(self):
        return self.states[-1]


def run_protocol(pt, protocol, rho0=None, transmon=None):
    """Contract a process tensor with a protocol and collect observables.

    rho0 defaults to the maximally mixed state over the qubit manifold (for a
    d-level transmon, mixed over the lowest two levels); the zero-temperature
    bath state is baked into the process tensor.  For the qubit the observable
    is P_+; for the transmon, the number-basis populations P_0..P_{d-1}.
    """
    dim = pt.system_dim
    if protocol.n_steps != pt.n_steps:
        raise DomainError(
            f"protocol has {protocol.n_steps} steps, process tensor {pt.n_steps}")
    if abs(protocol.dt - pt.dt) > 1e-12:
        raise DomainError("protocol and process tensor timesteps differ")
    if transmon is not None and transmon.d != dim:
        raise DomainError(
            f"transmon dimension {transmon.d} does not match process tensor {dim}")
    if transmon is None and dim != 2:
        raise DomainError("two-level run requested on a d-level process tensor")

    if rho0 is None:
        r0 = np.zeros((dim, dim), complex)
        r0[0, 0] = 0.5
        r0[1, 1] = 0.5
    else:
        r0 = np.asarray(rho0.rho if isinstance(rho0, SystemState) else rho0,
                        dtype=complex)

    props = build_propagators(protocol, transmon)
    if transmon is not None:
        _, V = transmon_coupling_basis(dim)
        r0_prop = V.conj().T @ r0 @ V
    else:
        r0_prop = r0
    traj = contract_trajectory(pt, props, r0_prop)
    if transmon is not None:
        traj = [V @ r @ V.conj().T for r in traj]
    states = [SystemState(rho=r) for r in traj]
    times = protocol.times
    if transmon is None:
        pops = np.array([excited_population(r) for r in traj])
    else:
        pops = np.array([np.real(np.diag(r)) for r in traj])
    return RunResult(times=times, states=states, populations=pops)


def contract_trajectory(pt, props, rho0_prop_basis):
    from .influence import contract
    return contract(pt, props, rho0_prop_basis)
