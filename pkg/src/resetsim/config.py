"""Run configuration: a single JSON file, GHz/ns at the boundary.

Sections and keys:

  bath     kind, alpha, omega_c_ghz, sigma_ghz (gaussian only), temperature_ghz
  tempo    dt_ns, t_f_ns, svd_cutoff, max_bond, memory_tol, memory_max_ns (opt)
  system   levels, omega_q0_ghz, alpha_A_ghz, bounds_ghz [lo, hi]
  control  mode ('constant' | 'optimize' | 'from_file'), protocol_file,
           gtol, maxiter, random_init, random_scale_ghz
  tdvp     n_modes, full_nonlinear (optional section)
  output   dir, prefix
"""

import json
from dataclasses import dataclass, field

from .bath import GAUSSIAN, OHMIC, SpectralDensity
from .errors import ConfigError
from .units import ghz_to_angular

_DEFAULTS = {
    "tempo": {"svd_cutoff": 1e-6, "max_bond": 256, "memory_tol": 1e-6,
              "memory_max_ns": 2.0},
    "system": {"levels": 2, "alpha_A_ghz": -0.3, "bounds_ghz": [4.0, 7.0]},
    "control": {"mode": "constant", "protocol_file": None, "gtol": 1e-9,
                "maxiter": 500, "random_init": False, "random_scale_ghz": 0.1},
    "tdvp": {"n_modes": 500, "full_nonlinear": False},
    "output": {"dir": "out", "prefix": "run"},
}

_KIND_ALIASES = {
    "ohmic-exponential": OHMIC, "ohmic": OHMIC,
    "gaussian-filtered": GAUSSIAN, "gaussian": GAUSSIAN,
}


@dataclass
class RunConfig:
    raw: dict
    bath: SpectralDensity
    dt: float
    t_f: float
    n_steps: int
    svd_cutoff: float
    max_bond: int
    memory_tol: float
    memory_max_steps: int
    levels: int
    omega_q0: float
    alpha_A: float
    bounds: tuple
    control_mode: str
    protocol_file: str
    gtol: float
    maxiter: int
    random_init: bool
    random_scale: float
    tdvp_n_modes: int
    tdvp_full_nonlinear: bool
    out_dir: str
    prefix: str


def _need(section, key, cfg):
    if section not in cfg:
        raise ConfigError(f"missing config section '{section}'")
    if key not in cfg[section]:
        raise ConfigError(f"missing config key '{section}.{key}'")
    return cfg[section][key]


def _get(section, key, cfg):
    return cfg.get(section, {}).get(key, _DEFAULTS.get(section, {}).get(key))


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    return parse_config(cfg)


def parse_config(cfg):
    kind_raw = _need("bath", "kind", cfg)
    kind = _KIND_ALIASES.get(str(kind_raw).lower())
    if kind is None:
        raise ConfigError(f"unknown bath.kind '{kind_raw}'")
    alpha = float(_need("bath", "alpha", cfg))
    omega_c = float(ghz_to_angular(_need("bath", "omega_c_ghz", cfg)))
    sigma_ghz = cfg["bath"].get("sigma_ghz", 0.0) or 0.0
    temperature_ghz = cfg["bath"].get("temperature_ghz", 0.0) or 0.0
    if kind == GAUSSIAN and sigma_ghz <= 0:
        raise ConfigError("bath.sigma_ghz must be > 0 for the gaussian kind")
    sd = SpectralDensity(kind=kind, alpha=alpha, omega_c=omega_c,
                         sigma=float(ghz_to_angular(sigma_ghz)),
                         temperature=float(ghz_to_angular(temperature_ghz)))

    dt = float(_need("tempo", "dt_ns", cfg))
    t_f = float(_need("tempo", "t_f_ns", cfg))
    if dt <= 0:
        raise ConfigError("tempo.dt_ns must be > 0")
    if t_f < dt:
        raise ConfigError("tempo.t_f_ns must be >= tempo.dt_ns")
    n_steps = int(round(t_f/dt))
    svd_cutoff = float(_get("tempo", "svd_cutoff", cfg))
    max_bond = int(_get("tempo", "max_bond", cfg))
    memory_tol = float(_get("tempo", "memory_tol", cfg))
    memory_max_ns = _get("tempo", "memory_max_ns", cfg)
    memory_max_steps = (n_steps if memory_max_ns in (None, 0)
                        else max(1, int(round(float(memory_max_ns)/dt))))

    levels = int(_get("system", "levels", cfg))
    omega_q0 = float(ghz_to_angular(_need("system", "omega_q0_ghz", cfg)))
    alpha_A = float(ghz_to_angular(_get("system", "alpha_A_ghz", cfg)))
    lo_ghz, hi_ghz = _get("system", "bounds_ghz", cfg)
    if not lo_ghz < hi_ghz:
        raise ConfigError("system.bounds_ghz must satisfy lo < hi")
    bounds = (float(ghz_to_angular(lo_ghz)), float(ghz_to_angular(hi_ghz)))
    if not bounds[0] <= omega_q0 <= bounds[1]:
        raise ConfigError("system.omega_q0_ghz must lie inside bounds_ghz")

    mode = str(_get("control", "mode", cfg))
    if mode not in ("constant", "optimize", "from_file"):
        raise ConfigError(f"control.mode '{mode}' not one of "
                          "constant|optimize|from_file")
    protocol_file = _get("control", "protocol_file", cfg)
    if mode == "from_file" and not protocol_file:
        raise ConfigError("control.protocol_file required for mode 'from_file'")

    return RunConfig(
        raw=cfg, bath=sd, dt=dt, t_f=t_f, n_steps=n_steps,
        svd_cutoff=svd_cutoff, max_bond=max_bond, memory_tol=memory_tol,
        memory_max_steps=memory_max_steps, levels=levels, omega_q0=omega_q0,
        alpha_A=alpha_A, bounds=bounds, control_mode=mode,
        protocol_file=protocol_file, gtol=float(_get("control", "gtol", cfg)),
        maxiter=int(_get("control", "maxiter", cfg)),
        random_init=bool(_get("control", "random_init", cfg)),
        random_scale=float(ghz_to_angular(_get("control", "random_scale_ghz", cfg))),
        tdvp_n_modes=int(_get("tdvp", "n_modes", cfg)),
        tdvp_full_nonlinear=bool(_get("tdvp", "full_nonlinear", cfg)),
        out_dir=str(_get("output", "dir", cfg)),
        prefix=str(_get("output", "prefix", cfg)))
