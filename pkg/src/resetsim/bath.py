"""Bath spectral densities, memory kernels, and continuum discretization.

The memory kernel eta(t) is the double antiderivative of the bath
autocorrelation function evaluated per timestep block; the Ohmic-exponential
form has closed-form expressions (log at zero temperature, log-Gamma at finite
temperature), the Gaussian-filtered form is integrated numerically with an
oscillation-aware composite Gauss-Legendre rule.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import loggamma, roots_legendre

from .errors import DomainError, NumericalAccuracyError, UnsupportedKindError
from .units import TWO_PI

OHMIC = "ohmic-exponential"
GAUSSIAN = "gaussian-filtered"

# temperatures below this (rad/ns) route to the T=0 formulas
_T_FLOOR = 1e-6


@dataclass(frozen=True)
class SpectralDensity:
    """Parameterized bath spectral density J(omega).

    kind          'ohmic-exponential' or 'gaussian-filtered'
    alpha         dimensionless coupling strength
    omega_c       cutoff (Ohmic) or filter center (Gaussian), rad/ns
    sigma         filter standard deviation, rad/ns (Gaussian kind only)
    temperature   bath temperature as angular frequency k_B T/hbar, rad/ns
    """

    kind: str
    alpha: float
    omega_c: float
    sigma: float = 0.0
    temperature: float = 0.0

    def __post_init__(self):
        if self.kind not in (OHMIC, GAUSSIAN):
            raise DomainError(f"unknown spectral density kind {self.kind!r}")
        if self.alpha < 0:
            raise DomainError("alpha must be >= 0")
        if self.omega_c <= 0:
            raise DomainError("omega_c must be > 0")
        if self.kind == GAUSSIAN and self.sigma <= 0:
            raise DomainError("gaussian-filtered kind requires sigma > 0")
        if self.temperature < 0:
            raise DomainError("temperature must be >= 0")

    @property
    def omega_support_max(self):
        """Frequency beyond which J carries negligible weight."""
        if self.kind == OHMIC:
            return 50.0*self.omega_c
        return self.omega_c + 12.0*self.sigma

    def cache_key(self):
        return (self.kind, float(self.alpha), float(self.omega_c),
                float(self.sigma), float(self.temperature))


@dataclass(frozen=True)
class DiscretizedBath:
    """Finite set of modes (omega_k, g_k) standing in for the continuum.

    g_k^2 sums over any frequency window approximate the J-integral over that
    window.  ``coverage`` is the fraction of the total J-integral captured by
    [0, omega_max]; ``coverage_warning`` flags coverage below 99.9%.
    """

    omega: np.ndarray
    g: np.ndarray
    scheme: str
    omega_max: float
    coverage: float = 1.0

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim != 1 or omega.size == 0:
            raise DomainError("omega must be a non-empty 1-d array")
        if np.any(omega <= 0) or np.any(np.diff(omega) <= 0):
            raise DomainError("mode frequencies must be positive and strictly increasing")
        if np.asarray(self.g).shape != omega.shape:
            raise DomainError("omega and g must have matching shapes")

    @property
    def n_modes(self):
        return self.omega.size

    @property
    def coverage_warning(self):
        return self.coverage < 0.999


def eval_spectral_density(sd, omega):
    """J(omega) for scalar or array omega >= 0."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise DomainError("omega must be >= 0")
    if sd.kind == OHMIC:
        out = 2.0*sd.alpha*w*np.exp(-w/sd.omega_c)
    else:
        out = 2.0*sd.alpha*w*np.exp(-((w - sd.omega_c)**2)/(2.0*sd.sigma**2))
    if np.isscalar(omega):
        return float(out)
    return out


def eta_analytic(sd, t):
    """Closed-form memory kernel eta(t) for the Ohmic-exponential kind.

    At T=0:  eta(t) = 2 alpha (-log(1 + i omega_c t) + i t omega_c).
    At T>0 the real part is a four-term combination of Re log Gamma, the
    imaginary part -2 alpha (arctan(omega_c t) - omega_c t) is unchanged.
    """
    if sd.kind != OHMIC:
        raise UnsupportedKindError(
            "analytic kernel exists only for the ohmic-exponential kind; "
            "use eta_quadrature")
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise DomainError("t must be >= 0")
    wc = sd.omega_c
    T = sd.temperature
    if T < _T_FLOOR:
        out = 2.0*sd.alpha*(-np.log1p(1j*wc*tt) + 1j*tt*wc)
    else:
        x = T/wc
        re = (loggamma(x + 1.0 + 1j*T*tt).real + loggamma(x + 1j*T*tt).real
              - loggamma(x + 1.0).real - loggamma(x).real)
        im = -(np.arctan(wc*tt) - wc*tt)
        out = 2.0*sd.alpha*(re + 1j*im)
    if np.isscalar(t):
        return complex(out)
    return out


def _gl_panels(breaks, order):
    """Gauss-Legendre nodes/weights on the union of panels given by breaks."""
    x, w = roots_legendre(order)
    a = breaks[:-1]
    b = breaks[1:]
    mid = 0.5*(a + b)[:, None]
    half = 0.5*(b - a)[:, None]
    nodes = mid + half*x[None, :]
    weights = half*np.broadcast_to(w, nodes.shape)
    return nodes.ravel(), weights.ravel()


def _eta_integrand(sd, w, t):
    """Integrand of the eta(t) definition at frequencies w (t scalar)."""
    J = eval_spectral_density(sd, w)
    T = sd.temperature
    if T < _T_FLOOR:
        coth = 1.0
    else:
        coth = 1.0/np.tanh(w/(2.0*T))
    re = coth*(np.cos(w*t) - 1.0)
    im = -(np.sin(w*t) - w*t)
    return (J/w**2)*(re + 1j*im)


def _breakpoints(sd, t):
    """Panel breakpoints resolving both J's structure and the cos/sin phase."""
    wmax = sd.omega_support_max
    base = np.linspace(0.0, wmax, 65)
    if t > 0:
        n_osc = int(np.ceil(wmax*t/np.pi))
        if n_osc > 1:
            osc = np.arange(1, n_osc)* (np.pi/t)
            base = np.union1d(base, osc[osc < wmax])
    return base


def eta_quadrature(sd, t, tol=1e-10):
    """Memory kernel eta(t) by composite Gauss-Legendre quadrature.

    Valid for both spectral-density kinds and any temperature.  Panels are
    aligned with the oscillation half-periods, so each panel is smooth; the
    error estimate compares two Gauss orders and a NumericalAccuracyError is
    raised if it exceeds ``tol``.
    """
    scalar = np.isscalar(t)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise DomainError("t must be >= 0")
    out = np.empty(ts.shape, complex)
    worst = 0.0
    for i, ti in enumerate(ts):
        if ti == 0.0:
            out[i] = 0.0
            continue
        breaks = _breakpoints(sd, ti)
        n16, w16 = _gl_panels(breaks, 16)
        v16 = np.sum(w16*_eta_integrand(sd, n16, ti))
        n24, w24 = _gl_panels(breaks, 24)
        v24 = np.sum(w24*_eta_integrand(sd, n24, ti))
        err = abs(v24 - v16)
        worst = max(worst, err)
        if err > tol:
            raise NumericalAccuracyError(
                f"eta quadrature did not reach tol={tol:g} at t={ti:g} ns",
                achieved=err)
        out[i] = v24
    if scalar:
        return complex(out[0])
    return out


def eta_for_modes(bath, t):
    """eta(t) for a discrete-mode bath (exact sum; T=0 vacuum modes)."""
    tt = np.asarray(t, dtype=float)[..., None]
    w = bath.omega[None, :]
    g2 = (bath.g**2)[None, :]
    val = (g2/w**2)*((np.cos(w*tt) - 1.0) - 1j*(np.sin(w*tt) - w*tt))
    out = val.sum(axis=-1)
    if np.isscalar(t):
        return complex(out)
    return out


@lru_cache(maxsize=32)
def _eta_grid_cached(key, dt, n_points, tol):
    sd = SpectralDensity(kind=key[0], alpha=key[1], omega_c=key[2],
                         sigma=key[3], temperature=key[4])
    ts = dt*np.arange(n_points)
    if sd.kind == OHMIC:
        return eta_analytic(sd, ts)
    return eta_quadrature(sd, ts, tol=tol)


def eta_blocks(sd, dt, n_steps, tol=1e-10):
    """Per-lag kernel blocks eta_0 .. eta_{n_steps-1}.

    eta_k = eta((k+1) dt) - 2 eta(k dt) + eta((k-1) dt) for k >= 1; the k=0
    block is the single-cell degenerate case, equal to eta(dt) since
    eta(0) = 0.  Accepts a SpectralDensity or a DiscretizedBath.
    """
    if dt <= 0:
        raise DomainError("dt must be > 0")
    if n_steps < 1:
        raise DomainError("n_steps must be >= 1")
    if isinstance(sd, DiscretizedBath):
        e = eta_for_modes(sd, dt*np.arange(n_steps + 1))
    else:
        e = _eta_grid_cached(sd.cache_key(), float(dt), int(n_steps) + 1, float(tol))
    out = np.empty(n_steps, complex)
    out[0] = e[1]
    k = np.arange(1, n_steps)
    out[1:] = e[k+1] - 2.0*e[k] + e[k-1]
    return out


def _total_weight(sd):
    """Integral of J over its support (panel quadrature, no oscillation)."""
    breaks = np.linspace(0.0, sd.omega_support_max, 257)
    nodes, weights = _gl_panels(breaks, 16)
    return float(np.sum(weights*eval_spectral_density(sd, nodes)))


def discretize(sd, n_modes=500, omega_max=None, scheme="linear"):
    """Replace the continuum by n_modes discrete modes with g_k^2 = J(w_k) dw_k.

    scheme 'linear' uses midpoint cells on (0, omega_max]; 'gauss' uses
    Gauss-Legendre nodes and weights on [0, omega_max].
    """
    if n_modes < 1:
        raise DomainError("n_modes must be >= 1")
    if omega_max is None:
        omega_max = 10.0*sd.omega_c if sd.kind == OHMIC else sd.omega_c + 6.0*sd.sigma
    if omega_max <= 0:
        raise DomainError("omega_max must be > 0")
    if scheme == "linear":
        dw = omega_max/n_modes
        omega = (np.arange(n_modes) + 0.5)*dw
        g2 = eval_spectral_density(sd, omega)*dw
    elif scheme == "gauss":
        x, w = roots_legendre(n_modes)
        omega = 0.5*omega_max*(x + 1.0)
        g2 = eval_spectral_density(sd, omega)*0.5*omega_max*w
    else:
        raise DomainError(f"unknown discretization scheme {scheme!r}")
    captured = float(np.sum(g2)) if scheme == "linear" else None
    # coverage: J-integral inside [0, omega_max] relative to full support
    breaks = np.linspace(0.0, omega_max, 257)
    nodes, weights = _gl_panels(breaks, 16)
    inside = float(np.sum(weights*eval_spectral_density(sd, nodes)))
    total = _total_weight(sd)
    coverage = inside/total if total > 0 else 1.0
    return DiscretizedBath(omega=omega, g=np.sqrt(np.maximum(g2, 0.0)),
                           scheme=scheme, omega_max=float(omega_max),
                           coverage=coverage)
