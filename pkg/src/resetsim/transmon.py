"""Multilevel (anharmonic-ladder) polaron ansatz and d-level reset runs.

The displaced-bath ansatz for the truncated anharmonic oscillator gives a
self-consistent fixed point for the displacements,

    f_k = -g_k / (2 (omega_q + 3 alpha_A S + omega_k)),   S = sum|f_k|^2,

and level populations expressed as an alternating double-factorial series in
S, convergent for S < 1/2.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import TransmonSpec, run_protocol
from .errors import ConvergenceError, DomainError
from .polaron import PolaronState
from .units import TWO_PI


@dataclass
class MultilevelPolaron:
    """Self-consistent displacements for the anharmonic ladder."""

    spec: TransmonSpec
    bath: object
    f: np.ndarray

    @property
    def total_excitation(self):
        return float(np.sum(np.abs(self.f)**2))


def solve_multilevel_displacements(spec, bath, tol=1e-12, max_iter=100):
    """Fixed-point iteration on S with under-relaxation if it oscillates."""
    omega = bath.omega
    g = bath.g
    wq = spec.omega_q
    aA = spec.alpha_A

    def f_of(S):
        denom = wq + 3.0*aA*S + omega
        if np.any(denom <= 0):
            raise DomainError(
                "omega_q + 3 alpha_A S + omega_k must stay positive")
        return -g/(2.0*denom)

    S = 0.0
    relax = 1.0
    last_step = None
    for _ in range(max_iter):
        f = f_of(S)
        S_new = float(np.sum(np.abs(f)**2))
        step = S_new - S
        if last_step is not None and step*last_step < 0:
            relax = 0.5
        S_next = S + relax*step
        if abs(S_next - S) <= tol*max(S_next, 1e-300):
            f = f_of(S_next)
            return MultilevelPolaron(spec=spec, bath=bath, f=f)
        last_step = step
        S = S_next
    raise ConvergenceError(
        f"displacement fixed point did not converge in {max_iter} iterations",
        last=MultilevelPolaron(spec=spec, bath=bath, f=f_of(S)))


def multilevel_energy(spec, bath, f):
    """Variational energy of the displaced ansatz (used by the minimization
    oracle): omega_q S + (3 alpha_A/2) S^2 + sum omega_k |f_k|^2
    + sum g_k Re f_k * 2 / 2."""
    f = np.asarray(f, dtype=complex)
    S = float(np.sum(np.abs(f)**2))
    return float(spec.omega_q*S + 1.5*spec.alpha_A*S**2
                 + np.sum(bath.omega*np.abs(f)**2)
                 + np.sum(bath.g*np.real(f)))


def population_series(mp, n, term_tol=1e-15, max_terms=500):
    """Level-n population of the displaced ground state.

        P_n = sum_p (-1)^p / (n! p!) S^{n+p} (2(n+p) - 1)!!

    The partial sum stops when the next term's magnitude falls below
    term_tol; S >= 1/2 is outside the convergence domain and raises (use the
    dense Fock-space oracle there).
    """
    S = mp.total_excitation if isinstance(mp, MultilevelPolaron) else float(mp)
    if n < 0:
        raise DomainError("level index must be >= 0")
    if S >= 0.5:
        raise ConvergenceError(
            f"series diverges for S={S:.3g} >= 1/2; evaluate in a truncated "
            "Fock space instead", last=None)
    if S == 0.0:
        return 1.0 if n == 0 else 0.0
    nfact = float(math.factorial(n))
    # term p: (-1)^p / (n! p!) S^{n+p} (2(n+p)-1)!!
    total = 0.0
    # p = 0 term
    dfact = 1.0
    for m in range(1, n + 1):
        dfact *= (2*m - 1)
    term = (S**n)*dfact/nfact
    p = 0
    while True:
        total += term
        # ratio term_{p+1}/term_p = -S (2(n+p)+1)/(p+1)
        ratio = -S*(2*(n + p) + 1)/(p + 1)
        term = term*ratio
        p += 1
        if abs(term) < term_tol:
            break
        if p > max_terms:
            raise ConvergenceError(
                f"population series needed more than {max_terms} terms",
                last=total)
    return float(total)


def run_multilevel_reset(pt_d, spec, protocol, rho0=None):
    """d-level reset run on a process tensor built for the matching coupling.

    Returns the RunResult with number-basis populations P_0..P_{d-1} per step.
    """
    if pt_d.system_dim != spec.d:
        raise DomainError(
            f"process tensor dimension {pt_d.system_dim} does not match d={spec.d}")
    return run_protocol(pt_d, protocol, rho0=rho0, transmon=spec)
