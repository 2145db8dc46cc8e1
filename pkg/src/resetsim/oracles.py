"""Independent ground-truth generators.

These deliberately share no propagation code with the tensor-network path:
the weak-coupling reference is a closed-form exponential, the small-bath
reference is dense exact diagonalization in a truncated joint Hilbert space,
and the level-population reference is a dense Fock-space matrix element.

Weak-coupling decay rate.  For H = (omega_q/2) sigma_x + sum omega b^dag b
+ (sigma_z/2) sum g (b + b^dag), the system eigenstates |+->, |-> are split by
omega_q and coupled through A = sigma_z/2 with |<-|A|+>| = 1/2.  The golden
rule gives the downward rate Gamma = 2 pi |<-|A|+>|^2 J(omega_q) at zero
temperature (the bath spectral function of B = sum g (b+b^dag) at omega > 0
is 2 pi J(omega)), hence

    Gamma = (pi/2) J(omega_q).
"""

import math
from dataclasses import dataclass

import numpy as np

from .bath import eval_spectral_density
from .dynamics import PLUS, SIGMA_X, SIGMA_Z
from .errors import DomainError
from .units import TWO_PI


def born_markov_rate(sd, omega_q0):
    """Golden-rule downward rate (pi/2) J(omega_q0) at T=0."""
    return 0.5*np.pi*eval_spectral_density(sd, omega_q0)


def lindblad_reference(sd, omega_q0, rho0=None, t_grid=None):
    """Excited population under the weak-coupling (Born-Markov) reduction.

    Amplitude damping toward the qubit ground state at the golden-rule rate;
    with a constant splitting this is exactly P_+(t) = P_+(0) exp(-Gamma t).
    """
    if t_grid is None:
        raise DomainError("t_grid is required")
    if rho0 is None:
        p0 = 0.5
    else:
        r = np.asarray(rho0.rho if hasattr(rho0, "rho") else rho0, complex)
        p0 = float(np.real(PLUS.conj() @ r @ PLUS))
    gamma = born_markov_rate(sd, omega_q0)
    return p0*np.exp(-gamma*np.asarray(t_grid, dtype=float))


@dataclass(frozen=True)
class TruncatedBathModel:
    """A handful of bath modes with small Fock truncations, for exact
    diagonalization; total joint dimension must stay diagonalizable."""

    omega: tuple
    g: tuple
    fock_dim: int = 4
    system_dim: int = 2

    def __post_init__(self):
        if len(self.omega) != len(self.g):
            raise DomainError("omega and g must have equal lengths")
        if len(self.omega) > 4:
            raise DomainError("at most 4 modes for the exact oracle")
        if self.fock_dim > 6:
            raise DomainError("fock_dim must be <= 6")
        if self.total_dim > 10_000:
            raise DomainError("joint dimension exceeds the oracle budget")

    @property
    def n_modes(self):
        return len(self.omega)

    @property
    def total_dim(self):
        return self.system_dim*self.fock_dim**self.n_modes


def _joint_hamiltonian(model, omega_q):
    """Dense H for the given qubit splitting (system_dim == 2)."""
    nf, nm = model.fock_dim, model.n_modes
    a = np.diag(np.sqrt(np.arange(1, nf)), 1)
    num = a.conj().T @ a
    x = a + a.conj().T
    dims = [2] + [nf]*nm
    total = int(np.prod(dims))

    def embed(op, site):
        mats = [np.eye(d, dtype=complex) for d in dims]
        mats[site] = op
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    H = embed(0.5*omega_q*SIGMA_X, 0)
    sz_half = embed(0.5*SIGMA_Z, 0)
    for k in range(nm):
        H = H + model.omega[k]*embed(num, 1 + k)
        H = H + model.g[k]*(sz_half @ embed(x, 1 + k))
    return H, total


def exact_small_bath(model, protocol, rho0_system=None):
    """Exact joint unitary evolution, bath starting in vacuum, system traced.

    ``protocol`` is a ControlProtocol (piecewise-constant splittings).
    Returns (times, p_plus array, reduced states list).
    """
    if model.system_dim != 2:
        raise DomainError("the exact oracle is two-level only")
    if rho0_system is None:
        rho0_system = 0.5*np.eye(2, dtype=complex)
    else:
        rho0_system = np.asarray(
            rho0_system.rho if hasattr(rho0_system, "rho") else rho0_system,
            dtype=complex)
    nf, nm = model.fock_dim, model.n_modes
    nb = nf**nm
    vac = np.zeros((nb, nb), complex)
    vac[0, 0] = 1.0
    rho = np.kron(rho0_system, vac)

    cache = {}

    def step_unitary(w):
        key = round(float(w), 12)
        if key not in cache:
            H, _ = _joint_hamiltonian(model, w)
            evals, V = np.linalg.eigh(H)
            cache[key] = (V*np.exp(-1j*evals*protocol.dt)[None, :]) @ V.conj().T
        return cache[key]

    def reduced(r):
        return np.trace(r.reshape(2, nb, 2, nb), axis1=1, axis2=3)

    states = [reduced(rho)]
    for w in protocol.omega:
        U = step_unitary(w)
        rho = U @ rho @ U.conj().T
        states.append(reduced(rho))
    p_plus = np.array([float(np.real(PLUS.conj() @ r @ PLUS)) for r in states])
    return protocol.times, p_plus, states


def exact_energy_drift(model, protocol, rho0_system=None):
    """Relative drift of <H> over a constant-splitting run (conservation check)."""
    w = float(protocol.omega[0])
    if not np.allclose(protocol.omega, w):
        raise DomainError("energy conservation applies to constant protocols")
    if rho0_system is None:
        rho0_system = 0.5*np.eye(2, dtype=complex)
    H, _ = _joint_hamiltonian(model, w)
    nf, nm = model.fock_dim, model.n_modes
    nb = nf**nm
    vac = np.zeros((nb, nb), complex)
    vac[0, 0] = 1.0
    rho = np.kron(np.asarray(rho0_system, complex), vac)
    evals, V = np.linalg.eigh(H)
    U = (V*np.exp(-1j*evals*protocol.dt)[None, :]) @ V.conj().T
    e0 = float(np.real(np.trace(H @ rho)))
    drift = 0.0
    scale = max(abs(e0), 1e-30)
    for _ in range(protocol.n_steps):
        rho = U @ rho @ U.conj().T
        drift = max(drift, abs(float(np.real(np.trace(H @ rho))) - e0))
    return drift/scale


def fock_bruteforce_Pn(S, n, fock_dim=40):
    """Dense evaluation of the displaced-ground-state level population.

    A single effective mode with |f|^2 = S suffices because the population
    depends on the displacements only through S:

        P_n = <0| (iB)^{2n}/n! exp(B^2) |0>,   B = f (b^dag - b).

    iB is Hermitian, so the matrix element is computed in its eigenbasis.
    """
    if S < 0:
        raise DomainError("S must be >= 0")
    if n < 0:
        raise DomainError("level index must be >= 0")
    if S == 0.0:
        return 1.0 if n == 0 else 0.0
    f = math.sqrt(S)
    b = np.diag(np.sqrt(np.arange(1, fock_dim)), 1)
    Bop = f*(b.conj().T - b)
    Hb = 1j*Bop                      # Hermitian
    evals, W = np.linalg.eigh(Hb)
    amp2 = np.abs(W[0, :])**2
    return float(np.sum(amp2*(evals**(2*n))*np.exp(-evals**2))/math.factorial(n))


def fit_exponential_rate(times, values, t_min=None, t_max=None):
    """Least-squares slope of -log(values) over a time window."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = v > 0
    if t_min is not None:
        mask &= t >= t_min
    if t_max is not None:
        mask &= t <= t_max
    if mask.sum() < 2:
        raise DomainError("not enough points in the fit window")
    slope, _ = np.polyfit(t[mask], np.log(v[mask]), 1)
    return -float(slope)
