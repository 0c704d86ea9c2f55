"""Builders for the reference precision-motion case studies.

All frequencies are in rad/s. The PCI-PID loop is

    e -> [1 + w_i/s, integrator resets] -> [K_p (s/w_d+1)/(s/w_t+1) 1/(s/w_f+1)] -> P

and its two-reset variant additionally passes ``e`` through an anti-notch
filter centred at the excitation frequency to form the reset trigger.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .hosidf_closed import ClosedLoopSystem
from .hosidf_open import ResetController, SinusoidSpec
from .hybridsim import OpenLoopSetup
from .linsys import StateSpace, TransferFunction, ss_series, tf_to_ss

__all__ = [
    "ShapingFilter",
    "CaseStudyParams",
    "Fig5Example",
    "build_plant",
    "build_pci",
    "build_c_alpha",
    "build_pci_pid",
    "build_tpci_pid",
    "build_fig5_example",
    "load_case",
]

PLANT_NUM = (6.615e5,)
PLANT_DEN = (83.57, 279.4, 5.837e5)


@dataclass(frozen=True)
class ShapingFilter:
    """``k_cs (s^2/w^2 + s/(w Q_1) + 1) / (s^2/w^2 + s/(w Q_2) + 1)``.

    At ``s = j*omega`` the gain is ``k_cs * Q_2 / Q_1`` with zero phase.
    """

    omega: float
    Q1: float = 1.0
    Q2: float = 100.0
    k_cs: float = 0.05

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"shaping filter {f.name} must be positive, got {v}")
        if not self.Q1 < self.Q2:
            raise ValueError("shaping filter needs Q1 < Q2")

    def at(self, omega: float) -> "ShapingFilter":
        return ShapingFilter(omega, self.Q1, self.Q2, self.k_cs)

    def transfer_function(self) -> TransferFunction:
        w2 = self.omega ** 2
        num = self.k_cs * np.array([1.0 / w2, 1.0 / (self.omega * self.Q1), 1.0])
        den = np.array([1.0 / w2, 1.0 / (self.omega * self.Q2), 1.0])
        return TransferFunction(num, den)

    def state_space(self) -> StateSpace:
        return tf_to_ss(self.transfer_function())


@dataclass(frozen=True)
class CaseStudyParams:
    gamma: float = 0.0
    K_p: float = 20.5
    omega_c: float = 2 * np.pi * 150
    omega_d: float = 2 * np.pi * 150 / 4.8
    omega_t: float = 2 * np.pi * 150 * 4.8
    omega_f: float = 2 * np.pi * 1500
    omega_i: float = 2 * np.pi * 15

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ValueError(f"{f.name} must be finite")
            if f.name.startswith("omega") and v <= 0:
                raise ValueError(f"{f.name} must be positive, got {v}")
        if not -1.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (-1, 1]")

    @classmethod
    def from_crossover(cls, omega_c: float, K_p: float = 20.5, gamma: float = 0.0,
                       lead_ratio: float = 4.8, lowpass_ratio: float = 10.0,
                       integrator_ratio: float = 0.1) -> "CaseStudyParams":
        return cls(gamma, K_p, omega_c, omega_c / lead_ratio, omega_c * lead_ratio,
                   omega_c * lowpass_ratio, omega_c * integrator_ratio)

    @classmethod
    def from_dict(cls, d: dict) -> "CaseStudyParams":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown case-study parameters: {sorted(extra)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return asdict(self)


def build_plant() -> TransferFunction:
    """Identified single-mode mass-spring-damper stage."""
    return TransferFunction(PLANT_NUM, PLANT_DEN)


def build_pci(p: CaseStudyParams) -> ResetController:
    """Proportional plus resetting integrator ``1 + w_i/s``."""
    return ResetController([[0.0]], [[p.omega_i]], [[1.0]], [[1.0]], p.gamma)


def build_c_alpha(p: CaseStudyParams) -> StateSpace:
    """Tamed lead-lag PID part, realized as a cascade of first-order sections."""
    lead = TransferFunction([p.K_p / p.omega_d, p.K_p], [1.0 / p.omega_t, 1.0])
    lowpass = TransferFunction([1.0], [1.0 / p.omega_f, 1.0])
    return ss_series(tf_to_ss(lead), tf_to_ss(lowpass))


def build_pci_pid(p: CaseStudyParams | None = None) -> ClosedLoopSystem:
    p = p or CaseStudyParams()
    return ClosedLoopSystem(build_pci(p), build_c_alpha(p), build_plant())


def build_tpci_pid(p: CaseStudyParams | None = None,
                   sf: ShapingFilter | None = None, omega: float | None = None) -> ClosedLoopSystem:
    """PCI-PID with the reset triggered by the shaped error.

    ``sf`` must be centred on the excitation frequency; passing only
    ``omega`` uses the default ``Q_1 = 1, Q_2 = 100, k_cs = 0.05`` filter.
    """
    p = p or CaseStudyParams()
    if sf is None:
        if omega is None:
            raise ValueError("give a shaping filter or the excitation frequency")
        sf = ShapingFilter(omega)
    return ClosedLoopSystem(build_pci(p), build_c_alpha(p), build_plant(),
                            sf.state_space())


@dataclass(frozen=True)
class Fig5Example:
    setup: OpenLoopSetup
    input: SinusoidSpec


def build_fig5_example() -> Fig5Example:
    """FORE ``1/(s/(300 pi)+1)`` (gamma 0), lead ``(s/(75 pi)+1)/(s/(1200 pi)+1)``,
    unit plant, input ``sin(400 pi t)``."""
    rc = ResetController.fore(300 * np.pi, 0.0)
    c_alpha = TransferFunction([1.0 / (75 * np.pi), 1.0], [1.0 / (1200 * np.pi), 1.0])
    setup = OpenLoopSetup(rc, c_alpha, TransferFunction.gain(1.0))
    return Fig5Example(setup, SinusoidSpec(1.0, 400 * np.pi))


def load_case(source) -> tuple[CaseStudyParams, ShapingFilter | None]:
    """Read parameters from a JSON file path, a dict, or a bundled name
    (``"pci_pid"`` or ``"tpci_pid"``).

    A ``"shaping"`` entry without ``omega`` gets a placeholder centre that
    callers re-centre with :meth:`ShapingFilter.at`.
    """
    if isinstance(source, dict):
        data = source
    elif isinstance(source, str) and not source.endswith(".json"):
        data = json.loads(resources.files("resetfreq").joinpath(
            f"data/{source}.json").read_text())
    else:
        data = json.loads(Path(source).read_text())
    params = CaseStudyParams.from_dict(data.get("params", {}))
    sf = None
    if data.get("shaping") is not None:
        s = dict(data["shaping"])
        s.setdefault("omega", 1.0)
        sf = ShapingFilter(**{k: float(v) for k, v in s.items()})
    return params, sf
