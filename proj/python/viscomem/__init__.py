"""Wave equations with time-dependent memory: simulation and verification tools."""

import json
from os import fspath
from pathlib import Path

from . import _core
from ._core import ConfigError, NumericError

__all__ = [
    "ConfigError",
    "NumericError",
    "attractor",
    "check_kernel",
    "decay",
    "effective_config",
    "eigenvalues",
    "gronwall",
    "gronwall_check",
    "kv_compare",
    "load",
    "minimal_c1",
    "simulate",
    "window_mass",
]


def _config_args(config, base_dir):
    if isinstance(config, (str, Path)) and not str(config).lstrip().startswith("{"):
        path = Path(config)
        return path.read_text(), fspath(path.parent) if base_dir is None else fspath(base_dir)
    text = config if isinstance(config, str) else json.dumps(config)
    return text, "" if base_dir is None else fspath(base_dir)


def load(path):
    """Configuration file as a dict with every default resolved."""
    return effective_config(path)


def effective_config(config, base_dir=None):
    return json.loads(_core.effective_config(*_config_args(config, base_dir)))


def eigenvalues(length, modes):
    return _core.eigenvalues(length, modes)


def simulate(config, base_dir=None):
    """Reference run with the inequality battery. Returns the report plus arrays t, u, v, energy_t, energy."""
    out = dict(_core.simulate(*_config_args(config, base_dir)))
    out["report"] = json.loads(out["report"])
    return out


def check_kernel(kernel):
    """Axiom certificate for a kernel block such as {"family": "rescaled", "c": 0.4}."""
    return json.loads(_core.check_kernel(json.dumps(kernel)))


def decay(config, base_dir=None):
    return json.loads(_core.decay(*_config_args(config, base_dir)))


def attractor(config, base_dir=None):
    return json.loads(_core.attractor(*_config_args(config, base_dir)))


def kv_compare(config, base_dir=None):
    return json.loads(_core.kv_compare(*_config_args(config, base_dir)))


def gronwall(config, base_dir=None):
    return json.loads(_core.gronwall(*_config_args(config, base_dir)))


def gronwall_check(Lambda, q1, q2, dt, eps, c1=0.0, c2=0.0, tau=0.0):
    """Hypothesis and conclusion reports for sampled Lambda, q1, q2."""
    return json.loads(_core.gronwall_check(Lambda, q1, q2, dt, eps, c1, c2, tau))


def minimal_c1(q1, dt, eps):
    return _core.minimal_c1(q1, dt, eps)


def window_mass(q2, dt):
    return _core.window_mass(q2, dt)
