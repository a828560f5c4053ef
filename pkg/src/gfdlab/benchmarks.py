"""Named benchmark models and their closed-form oracles.

Two structural facts pin down exact answers for calibration:

* With a constant division rate b_bar above threshold 0, the embedded
  genealogy is a binary branching process in which every individual
  independently divides with probability b_bar/(b_bar + D) and dies
  otherwise, regardless of mass. Its extinction probability is the
  minimal root of D + b_bar q^2 = (D + b_bar) q, namely min(1, D/b_bar).
* Total mass balance: integrating the generator against 1 gives
  d/dt (population) driven by b - D, so for constant b_bar the growth
  rate is exactly b_bar - D.

Models are addressable from the command line as ``builtin:NAME``.
"""

from __future__ import annotations

import numpy as np

from .config import (ConfigError, DivisionRateModel, EnvironmentRange,
                     GrowthModel, ModelDefinition, RunConfig,
                     SimulationSettings, SolverSettings)
from .kernels import DivisionKernel


def gw_extinction_oracle(b_bar, D):
    """Extinction probability of the constant-rate model, min(1, D/b_bar)."""
    if b_bar <= 0:
        raise ValueError("b_bar must be positive")
    return min(1.0, D / b_bar)


def mass_balance_lambda_oracle(b_bar, D):
    """Exact growth rate b_bar - D of the constant-rate model."""
    return b_bar - D


def constant_rate_model(b_bar=2.0, D=1.0, mu_max=1.0, l0=0.25):
    """Mass-blind benchmark: constant division above threshold 0.

    Growth is logistic (so masses still move), the kernel uniform; the
    genealogy statistics do not depend on either.
    """
    M = 1.0
    return ModelDefinition(
        max_mass=M, death_rate=D,
        growth=GrowthModel(family="logistic_monod", max_mass=M,
                           mu_max=mu_max, half_saturation=1.0),
        division=DivisionRateModel(family="constant", max_mass=M,
                                   b_bar=b_bar, m_div=0.0),
        kernel=DivisionKernel(family="uniform", l0=l0, max_mass=M),
    )


def logramp_model():
    """Logistic growth with a linear division ramp above mass 0.2.

    g(S, x) = (2 S / (1 + S)) x (1 - x), b(x) = 4 max(0, x - 0.2)/0.8,
    uniform kernel with margin 0.25, on the unit mass interval.
    """
    M = 1.0
    return ModelDefinition(
        max_mass=M, death_rate=1.0,
        growth=GrowthModel(family="logistic_monod", max_mass=M,
                           mu_max=2.0, half_saturation=1.0),
        division=DivisionRateModel(family="ramp", max_mass=M,
                                   b_bar=4.0, m_div=0.2, gamma=1.0),
        kernel=DivisionKernel(family="uniform", l0=0.25, max_mass=M),
    )


def adversarial_bdec_model():
    """Division rate decreasing in mass; trips the monotonicity checks."""
    M = 1.0
    return ModelDefinition(
        max_mass=M, death_rate=1.0,
        growth=GrowthModel(family="logistic_monod", max_mass=M,
                           mu_max=1.0, half_saturation=1.0),
        division=DivisionRateModel(family="ramp_down", max_mass=M,
                                   b_bar=2.0, m_div=0.0, gamma=1.0),
        kernel=DivisionKernel(family="uniform", l0=0.25, max_mass=M),
    )


def adversarial_kernel_model():
    """Asymmetric kernel; trips the symmetry check."""
    M = 1.0
    return ModelDefinition(
        max_mass=M, death_rate=1.0,
        growth=GrowthModel(family="logistic_monod", max_mass=M,
                           mu_max=1.0, half_saturation=1.0),
        division=DivisionRateModel(family="constant", max_mass=M,
                                   b_bar=2.0, m_div=0.0),
        kernel=DivisionKernel(family="asymmetric_debug", max_mass=M),
    )


def sliding_margin_model():
    """Uniform kernel with margin l(x) = 0.45 (1 - x/M).

    The margin shrinks fast enough that l + x l' < 0 on the upper half
    of the interval, so the daughter-mass coupling property fails.
    """
    M = 1.0
    return ModelDefinition(
        max_mass=M, death_rate=1.0,
        growth=GrowthModel(family="logistic_monod", max_mass=M,
                           mu_max=1.0, half_saturation=1.0),
        division=DivisionRateModel(family="constant", max_mass=M,
                                   b_bar=2.0, m_div=0.0),
        kernel=DivisionKernel(family="uniform", l0=0.45, l1=-0.45,
                              max_mass=M),
    )


def _cfg(model, s_values, d_values, **sim_kwargs):
    return RunConfig(
        model=model,
        env=EnvironmentRange(s_values=tuple(s_values), d_values=tuple(d_values)),
        solver=SolverSettings(),
        simulation=SimulationSettings(**sim_kwargs),
    )


_REGISTRY = {
    "LOGRAMP": lambda: _cfg(logramp_model(),
                            (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0),
                            (0.3, 0.6, 1.0, 1.5)),
    "CONSTANT": lambda: _cfg(constant_rate_model(), (1.0,), (1.0,)),
    "ADVERSE_BDEC": lambda: _cfg(adversarial_bdec_model(), (1.0,), (1.0,)),
    "ADVERSE_KERNEL": lambda: _cfg(adversarial_kernel_model(), (1.0,), (1.0,)),
    "SLIDING_MARGIN": lambda: _cfg(sliding_margin_model(), (1.0,), (1.0,)),
}


def builtin_names():
    return sorted(_REGISTRY)


def named_config(name):
    """Resolve ``builtin:NAME`` (or bare NAME) to a full run configuration."""
    key = name.split(":", 1)[1] if name.startswith("builtin:") else name
    key = key.upper()
    if key not in _REGISTRY:
        raise ConfigError(f"unknown builtin model {key!r}; "
                          f"choose from {', '.join(builtin_names())}")
    return _REGISTRY[key]()
