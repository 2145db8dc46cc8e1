"""Aggregated oracle cross-checks for the verify subcommand.

Each check compares two algorithmically independent routes to the same
quantity and reports the measured deviation against a fixed threshold.
"""

import numpy as np

from .bath import (OHMIC, SpectralDensity, discretize, eta_analytic,
                   eta_quadrature)
from .control import cost_and_gradient
from .dynamics import ControlProtocol
from .errors import DomainError
from .influence import build_influence, build_process_tensor
from .oracles import (TruncatedBathModel, born_markov_rate, exact_small_bath,
                      fit_exponential_rate, fock_bruteforce_Pn)
from .transmon import population_series
from .units import TWO_PI


def _check(name, measured, threshold):
    return {"name": name, "measured": float(measured),
            "threshold": float(threshold), "pass": bool(measured <= threshold)}


def check_kernel_equivalence(temperature=0.0, n_points=40):
    sd = SpectralDensity(kind=OHMIC, alpha=0.03, omega_c=TWO_PI*5.0,
                         temperature=temperature)
    ts = np.linspace(0.0, 20.0, n_points)
    ana = eta_analytic(sd, ts)
    quad = eta_quadrature(sd, ts)
    return float(np.max(np.abs(ana - quad)))


def check_exact_bath(dt=0.01, t_f=1.0):
    model = TruncatedBathModel(omega=(TWO_PI*5.0,), g=(TWO_PI*0.08,),
                               fock_dim=4)
    n = int(round(t_f/dt))
    protocol = ControlProtocol.constant(TWO_PI*5.0, dt, n)
    bath = _model_as_bath(model)
    inf = build_influence(bath, dt, n)
    pt = build_process_tensor(inf, svd_cutoff=1e-7, max_bond=128)
    from .dynamics import run_protocol
    run = run_protocol(pt, protocol)
    _, p_exact, _ = exact_small_bath(model, protocol)
    return float(np.max(np.abs(run.p_plus - p_exact)))


def _model_as_bath(model):
    from .bath import DiscretizedBath
    omega = np.asarray(model.omega, dtype=float)
    order = np.argsort(omega)
    return DiscretizedBath(omega=omega[order],
                           g=np.asarray(model.g, dtype=float)[order],
                           scheme="explicit", omega_max=float(omega.max()))


def check_gradient(dt=0.01, n=60, alpha=0.03, seed=3):
    sd = SpectralDensity(kind=OHMIC, alpha=alpha, omega_c=TWO_PI*5.0)
    inf = build_influence(sd, dt, n)
    pt = build_process_tensor(inf, svd_cutoff=1e-7, max_bond=128)
    rng = np.random.default_rng(seed)
    lo, hi = TWO_PI*4.0, TWO_PI*7.0
    omega = np.clip(TWO_PI*5.0 + TWO_PI*rng.uniform(-0.8, 0.8, n), lo, hi)
    protocol = ControlProtocol(omega=omega, dt=dt, bounds=(lo, hi))
    _, grad = cost_and_gradient(pt, protocol)
    h = np.sqrt(np.finfo(float).eps)*TWO_PI*5.0
    idx = rng.choice(n, size=6, replace=False)
    fd = np.zeros(idx.size)
    for i, j in enumerate(idx):
        for sign in (+1, -1):
            om = omega.copy()
            om[j] += sign*h
            z = cost_and_gradient(
                pt, ControlProtocol(omega=om, dt=dt, bounds=(lo, hi)))[0]
            fd[i] += sign*z
        fd[i] /= 2*h
    scale = max(np.max(np.abs(fd)), 1e-30)
    return float(np.max(np.abs(grad[idx] - fd))/scale)


def check_population_series():
    worst = 0.0
    for S in (0.001, 0.01, 0.1):
        for n in range(4):
            a = population_series(S, n)
            b = fock_bruteforce_Pn(S, n)
            worst = max(worst, abs(a - b))
    return worst


def check_born_markov(dt=0.01, t_f=2.5, alpha=0.003):
    sd = SpectralDensity(kind=OHMIC, alpha=alpha, omega_c=TWO_PI*5.0)
    n = int(round(t_f/dt))
    inf = build_influence(sd, dt, n, memory_max_steps=int(round(1.5/dt)))
    pt = build_process_tensor(inf, svd_cutoff=1e-7, max_bond=128)
    protocol = ControlProtocol.constant(TWO_PI*5.0, dt, n)
    from .dynamics import run_protocol
    run = run_protocol(pt, protocol)
    rate = fit_exponential_rate(run.times, run.p_plus, t_min=0.3, t_max=t_f)
    ref = born_markov_rate(sd, TWO_PI*5.0)
    return abs(rate - ref)/ref


def run_all(cfg=None):
    checks = [
        _check("kernel_equivalence_T0", check_kernel_equivalence(0.0), 1e-8),
        _check("kernel_equivalence_finite_T",
               check_kernel_equivalence(TWO_PI*0.5), 1e-8),
        _check("exact_bath_populations", check_exact_bath(), 1e-3),
        _check("gradient_vs_finite_differences", check_gradient(), 1e-4),
        _check("population_series_vs_fock", check_population_series(), 1e-8),
        _check("born_markov_rate", check_born_markov(), 0.10),
    ]
    return {"checks": checks, "all_pass": all(c["pass"] for c in checks)}
