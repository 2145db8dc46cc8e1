"""Optimal control of the per-step qubit frequency.

The cost is the infidelity of the final contracted state against a pure
target.  Its gradient with respect to every per-step frequency comes from one
forward sweep over the process-tensor cores (caching the left states) and one
reverse adjoint sweep, with the derivative of each propagator half taken in
closed form; the result is exact for the discrete-time contracted dynamics up
to floating-point rounding.  Minimization uses bound-constrained L-BFGS-B.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dynamics import (ControlProtocol, GROUND_PROJECTOR, SystemState,
                       qubit_propagator, qubit_step_generators,
                       transmon_coupling_basis, transmon_step_generator)
from .errors import DomainError
from .units import TWO_PI


def infidelity(rho_f, rho_T):
    """Z = 1 - Tr(rho_f rho_T) for a pure target rho_T."""
    rf = np.asarray(rho_f.rho if isinstance(rho_f, SystemState) else rho_f)
    rt = np.asarray(rho_T.rho if isinstance(rho_T, SystemState) else rho_T)
    if rf.shape != rt.shape:
        raise DomainError("state and target dimensions differ")
    purity = np.real(np.trace(rt @ rt))
    if abs(purity - 1.0) > 1e-9:
        raise DomainError("target must be a pure-state projector")
    z = 1.0 - float(np.real(np.trace(rf @ rt)))
    return min(max(z, 0.0), 1.0)


def _target_vector(rho_T, dim):
    rt = np.asarray(rho_T.rho if isinstance(rho_T, SystemState) else rho_T,
                    dtype=complex)
    if rt.shape != (dim, dim):
        raise DomainError(f"target must be {dim}x{dim}")
    # Tr(rho_f rho_T) = sum_nu vec(rho_f)[nu] vec(rho_T^T)[nu]
    return rt.T.reshape(dim*dim)


_CACHE_LIMIT_BYTES = 2_000_000_000


def _prepare(pt, protocol, rho0, rho_T, transmon):
    dim = pt.system_dim
    if protocol.n_steps != pt.n_steps:
        raise DomainError(
            f"protocol has {protocol.n_steps} steps, process tensor {pt.n_steps}")
    if transmon is not None and transmon.d != dim:
        raise DomainError("transmon dimension does not match process tensor")
    if transmon is None and dim != 2:
        raise DomainError("two-level control requested on a d-level process tensor")
    if rho0 is None:
        r0 = np.zeros((dim, dim), complex)
        r0[0, 0] = 0.5
        r0[1, 1] = 0.5
    else:
        r0 = np.asarray(rho0.rho if isinstance(rho0, SystemState) else rho0,
                        dtype=complex)
    if rho_T is None:
        rt = GROUND_PROJECTOR.copy() if transmon is None else None
        if rt is None:
            rt = np.zeros((dim, dim), complex)
            rt[0, 0] = 1.0
    else:
        rt = np.asarray(rho_T.rho if isinstance(rho_T, SystemState) else rho_T,
                        dtype=complex)
    if transmon is not None:
        _, V = transmon_coupling_basis(dim)
        r0 = V.conj().T @ r0 @ V
        rt = V.conj().T @ rt @ V
    chi_max = max(c.shape[0] for c in pt.cores)
    need = pt.n_steps*chi_max*dim*dim*16
    if need > _CACHE_LIMIT_BYTES:
        raise MemoryError(
            f"forward cache would need {need/1e9:.1f} GB; a checkpointing "
            "mode (recompute segments during the reverse sweep) is required "
            "for this problem size")
    return r0, rt


def _step_generator_fn(dt, transmon):
    if transmon is None:
        def gen(w):
            g, derivs = qubit_step_generators(w, dt)
            return g, derivs[0]
    else:
        def gen(w):
            return transmon_step_generator(transmon, w, dt)
    return gen


def cost_and_gradient(pt, protocol, rho0=None, rho_T=None, transmon=None):
    """Infidelity of the contracted final state and its exact gradient
    dZ/d omega_q[n], via forward caching and one adjoint sweep."""
    r0, rt = _prepare(pt, protocol, rho0, rho_T, transmon)
    dim = pt.system_dim
    y = rt.T.reshape(dim*dim)
    gen = _step_generator_fn(protocol.dt, transmon)
    n = pt.n_steps
    cores = pt.cores
    logs = pt.log_scales
    z0 = pt.closure_scale
    coresT = [c.transpose(1, 0, 2) for c in cores]

    X = r0.reshape(1, dim*dim).astype(complex)
    logX = 0.0
    Xs = []
    gs = []
    dgs = []
    for j in range(n):
        g, dg = gen(protocol.omega[j])
        Xs.append((X, logX))
        gs.append(g)
        dgs.append(dg)
        X = X @ g.T
        X = np.matmul(X.T[:, None, :], coresT[j])[:, 0, :].T
        X = X @ g.T
        nr = np.linalg.norm(X)
        if nr == 0.0:
            raise DomainError(f"state annihilated at step {j}")
        X = X/nr
        logX = logX + np.log(nr) + logs[j]
    rho_f = (pt.caps[n] @ X)*(np.exp(logX)/z0)
    Z = 1.0 - float(np.real(np.dot(y, rho_f)))

    lam = np.outer(pt.caps[n], y)
    loglam = 0.0
    grad = np.zeros(n)
    for j in range(n-1, -1, -1):
        Xj, logXj = Xs[j]
        g = gs[j]
        dg = dgs[j]
        A = Xj @ g.T
        Acore = np.matmul(A.T[:, None, :], coresT[j])[:, 0, :].T
        dA = Xj @ dg.T
        dAcore = np.matmul(dA.T[:, None, :], coresT[j])[:, 0, :].T
        term = (dAcore @ g.T) + (Acore @ dg.T)
        grad[j] = -np.real(np.sum(lam*term)*np.exp(logXj + loglam + logs[j])/z0)
        lam = lam @ g
        lam = np.einsum("bvc,cv->bv", cores[j], lam)
        lam = lam @ g
        nr = np.linalg.norm(lam)
        if nr == 0.0:
            raise DomainError(f"adjoint state annihilated at step {j}")
        lam = lam/nr
        loglam = loglam + np.log(nr) + logs[j]
    return Z, grad


def gradient(pt, protocol, rho0=None, rho_T=None, transmon=None):
    """Exact gradient of the infidelity w.r.t. the per-step frequencies."""
    return cost_and_gradient(pt, protocol, rho0, rho_T, transmon)[1]


@dataclass
class OptimizationResult:
    """Outcome of a bound-constrained protocol optimization."""

    protocol: ControlProtocol
    infidelity: float
    history: np.ndarray
    gradient_norm_final: float
    n_evaluations: int
    n_iterations: int
    converged: bool
    message: str = ""


def optimize(pt, initial, rho0=None, rho_T=None, bounds=None,
             gtol=1e-9, maxiter=500, transmon=None):
    """Minimize the infidelity over per-step frequencies with L-BFGS-B.

    Starts from ``initial`` (typically the constant protocol), respects the
    box bounds exactly, and never returns a protocol worse than the initial
    one.  Stops on projected-gradient infinity norm < gtol or maxiter.
    """
    if bounds is None:
        bounds = initial.bounds
    lo, hi = bounds
    x0 = np.clip(np.asarray(initial.omega, dtype=float), lo, hi)

    evals = {"n": 0, "last": None}

    def fun(x):
        z, g = cost_and_gradient(
            pt, ControlProtocol(omega=x, dt=initial.dt, bounds=(lo, hi)),
            rho0=rho0, rho_T=rho_T, transmon=transmon)
        evals["n"] += 1
        evals["last"] = (x.copy(), z)
        return z, g

    history = []

    def callback(xk):
        last = evals["last"]
        if last is not None and np.array_equal(last[0], xk):
            zk = last[1]
        else:
            zk = cost_and_gradient(
                pt, ControlProtocol(omega=xk, dt=initial.dt, bounds=(lo, hi)),
                rho0=rho0, rho_T=rho_T, transmon=transmon)[0]
        history.append(zk)

    z_init, _ = fun(x0)
    history.append(z_init)
    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   bounds=[(lo, hi)]*x0.size, callback=callback,
                   options={"maxiter": maxiter, "maxcor": 10,
                            "ftol": 1e-18, "gtol": gtol})
    x_best, z_best = res.x, float(res.fun)
    if z_best > z_init:
        x_best, z_best = x0, z_init
    x_best = np.clip(x_best, lo, hi)
    hist = np.array(history)
    hist = np.minimum.accumulate(hist)
    return OptimizationResult(
        protocol=ControlProtocol(omega=x_best, dt=initial.dt, bounds=(lo, hi)),
        infidelity=z_best,
        history=hist,
        gradient_norm_final=float(np.max(np.abs(res.jac))) if res.jac is not None else np.nan,
        n_evaluations=evals["n"],
        n_iterations=int(res.nit),
        converged=bool(res.success),
        message=str(res.message))


def power_spectrum(protocol):
    """Mean-subtracted discrete power spectrum of omega_q(t_n).

    Returns (frequencies in GHz, |DFT|^2); the bin spacing is 1/t_f.
    """
    sig = protocol.omega - protocol.omega.mean()
    power = np.abs(np.fft.rfft(sig))**2
    freq = np.fft.rfftfreq(protocol.n_steps, protocol.dt)
    return freq, power


def dominant_peak(freq, power, f_min=0.0):
    """Frequency of the highest power bin at or above f_min (GHz)."""
    mask = freq >= f_min
    return float(freq[mask][np.argmax(power[mask])])


def two_sided_peaks(freq, power, center_ghz, f_min=0.0):
    """The dominant local maxima below and above a center frequency."""
    mask = freq >= f_min
    f = freq[mask]
    p = power[mask]
    below = f < center_ghz
    above = f > center_ghz
    if not below.any() or not above.any():
        raise DomainError("no bins on both sides of the center frequency")
    f_lo = float(f[below][np.argmax(p[below])])
    f_hi = float(f[above][np.argmax(p[above])])
    return f_lo, f_hi
