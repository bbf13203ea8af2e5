"""Scenario files (YAML) for the ``run`` command.

Example::

    n: 3
    inertia: {principal3: [1.0, 1.5, 2.0]}   # or identity / {diagonal: [...]} / {full: [[...]]}
    initial:
      s0: [0.1, -0.2, 0.3]    # exponential coordinates, adapted basis (Z block first)
      u0: [1.0, 0.0, 0.5]
    T: 10.0
    dt: 0.001
    form: omega_nh            # or omega_tilde
    reparam: false
    seed: 0
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml

from .ball import InertiaTensor, PhasePoint
from .son import algebra_dim, group_exp, hat

__all__ = ["Scenario", "ScenarioParseError", "ScenarioValidationError", "load_scenario", "parse_scenario"]

FORMS = {"omega_nh": "OMEGA_NH", "omega_tilde": "OMEGA_TILDE"}
_KEYS = {"n", "inertia", "initial", "T", "dt", "form", "reparam", "seed"}


class ScenarioParseError(ValueError):
    """The file is not a well-formed scenario."""


class ScenarioValidationError(ValueError):
    """The scenario is well formed but physically or numerically invalid."""


@dataclass(frozen=True)
class Scenario:
    n: int
    inertia_spec: dict
    s0: tuple
    u0: tuple
    T: float
    dt: float
    form: str = "omega_nh"
    reparam: bool = False
    seed: int = 0

    @property
    def inertia(self) -> InertiaTensor:
        return build_inertia(self.n, self.inertia_spec)

    @property
    def initial_point(self) -> PhasePoint:
        s = group_exp(hat(np.array(self.s0), self.n))
        return PhasePoint(s, np.array(self.u0))

    @property
    def form_tag(self) -> str:
        return FORMS[self.form]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["s0"], d["u0"] = list(self.s0), list(self.u0)
        return d


def build_inertia(n: int, spec: dict) -> InertiaTensor:
    (kind, value), = spec.items()
    try:
        if kind == "identity":
            return InertiaTensor.identity(n)
        if kind == "diagonal":
            return InertiaTensor.diagonal(n, value)
        if kind == "full":
            return InertiaTensor(n, np.array(value, dtype=float))
        if kind == "principal3":
            if n != 3 or len(value) != 3:
                raise ValueError("principal3 needs n = 3 and three moments")
            return InertiaTensor.principal3(*value)
    except ValueError as exc:
        raise ScenarioValidationError(f"inertia: {exc}") from None
    raise ScenarioValidationError(f"unknown inertia kind {kind!r}")


def _num_list(x, what):
    if not isinstance(x, (list, tuple)) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        raise ScenarioParseError(f"{what} must be a list of numbers")
    return tuple(float(v) for v in x)


def _number(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ScenarioParseError(f"{what} must be a number")
    return float(x)


def parse_scenario(text: str) -> Scenario:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"invalid YAML: {str(exc).splitlines()[0]}") from None
    if not isinstance(raw, dict):
        raise ScenarioParseError("scenario must be a mapping")
    unknown = set(raw) - _KEYS
    if unknown:
        raise ScenarioParseError(f"unknown keys: {sorted(unknown)}")
    missing = {"n", "inertia", "initial", "T", "dt"} - set(raw)
    if missing:
        raise ScenarioParseError(f"missing keys: {sorted(missing)}")

    n = raw["n"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ScenarioParseError("n must be an integer")
    inertia = raw["inertia"]
    if inertia == "identity":
        inertia = {"identity": None}
    if not isinstance(inertia, dict) or len(inertia) != 1:
        raise ScenarioParseError("inertia must be 'identity' or a single-key mapping")
    (kind, value), = inertia.items()
    if kind == "diagonal" or kind == "principal3":
        value = list(_num_list(value, f"inertia.{kind}"))
    elif kind == "full":
        if not isinstance(value, list):
            raise ScenarioParseError("inertia.full must be a nested list")
        value = [list(_num_list(row, "inertia.full row")) for row in value]
    inertia = {kind: value}

    init = raw["initial"]
    if not isinstance(init, dict) or "u0" not in init or set(init) - {"s0", "u0"}:
        raise ScenarioParseError("initial must be a mapping with u0 and optional s0")
    u0 = _num_list(init["u0"], "initial.u0")
    s0 = _num_list(init.get("s0", [0.0] * len(u0)), "initial.s0")

    form = raw.get("form", "omega_nh")
    reparam = raw.get("reparam", False)
    seed = raw.get("seed", 0)
    if not isinstance(form, str):
        raise ScenarioParseError("form must be a string")
    if not isinstance(reparam, bool):
        raise ScenarioParseError("reparam must be true or false")
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioParseError("seed must be an integer")
    sc = Scenario(n, inertia, s0, u0, _number(raw["T"], "T"), _number(raw["dt"], "dt"),
                  form.lower(), reparam, seed)
    validate(sc)
    return sc


def validate(sc: Scenario) -> None:
    if sc.n < 3:
        raise ScenarioValidationError(f"n must be at least 3, got {sc.n}")
    m = algebra_dim(sc.n)
    if len(sc.u0) != m or len(sc.s0) != m:
        raise ScenarioValidationError(f"s0 and u0 need {m} coefficients for n = {sc.n}")
    if not (sc.dt > 0 and np.isfinite(sc.dt)):
        raise ScenarioValidationError("dt must be positive")
    if not (sc.T > 0 and np.isfinite(sc.T)):
        raise ScenarioValidationError("T must be positive")
    steps = round(sc.T / sc.dt)
    if abs(steps * sc.dt - sc.T) > 1e-9 * sc.T:
        raise ScenarioValidationError("T must be an integer multiple of dt")
    if sc.form not in FORMS:
        raise ScenarioValidationError(f"form must be one of {sorted(FORMS)}")
    if not all(np.isfinite(sc.u0)) or not all(np.isfinite(sc.s0)):
        raise ScenarioValidationError("initial data must be finite")
    sc.inertia  # raises on non-SPD input


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario: {exc.strerror}") from None
    return parse_scenario(text)
