"""Unit conventions.

All internal angular frequencies are in rad/ns and times in ns.  User-facing
inputs quote ordinary frequencies in GHz (as is conventional for transmon
parameters), so conversion is a factor of 2*pi at the boundary.  Temperatures
are quoted as angular-frequency equivalents (k_B T / hbar).
"""

import numpy as np

TWO_PI = 2.0*np.pi


def ghz_to_angular(f_ghz):
    """Ordinary frequency in GHz -> angular frequency in rad/ns."""
    return TWO_PI*np.asarray(f_ghz, dtype=float)


def angular_to_ghz(omega):
    """Angular frequency in rad/ns -> ordinary frequency in GHz."""
    return np.asarray(omega, dtype=float)/TWO_PI
