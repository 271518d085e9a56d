"""Transfer scenario definitions: constants, spacecraft, boundary states.

Scenario files are flat key = value text with unit-tagged keys so every
number can be audited against its source by eye.  Two scenario files ship
with the package: a GTO to L1-halo transfer and an L2-halo to L1-halo
transfer in the Earth-Moon system.
"""

import importlib.resources
from dataclasses import dataclass

import numpy as np

from .dynamics import SpacecraftParams, SystemConstants
from .errors import ScenarioFormatError

SECONDS_PER_DAY = 86400.0

_SCALAR_KEYS = ("mass_parameter", "time_unit_s", "length_unit_km",
                "velocity_unit_kmps", "initial_mass_kg", "max_thrust_n",
                "specific_impulse_s")
_VECTOR_KEYS = ("r_i_lu", "v_i_vu", "r_f_lu", "v_f_vu")


@dataclass(frozen=True)
class Scenario:
    """Fully resolved transfer problem in non-dimensional units."""

    name: str
    constants: SystemConstants
    spacecraft: SpacecraftParams
    r_i: np.ndarray
    v_i: np.ndarray
    r_f: np.ndarray
    v_f: np.ndarray
    tof: float  # TU

    def initial_extended_state(self, lam0):
        y0 = np.empty(14)
        y0[0:3] = self.r_i
        y0[3:6] = self.v_i
        y0[6] = 1.0
        y0[7:14] = np.asarray(lam0, dtype=float)
        return y0

    @property
    def tof_days(self):
        return self.tof * self.constants.tu / SECONDS_PER_DAY


def _parse_lines(text, origin):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioFormatError(
                f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key in values:
            raise ScenarioFormatError(f"{origin}:{lineno}: duplicate key {key}")
        values[key] = (val, lineno)
    return values


def _pop_scalar(values, key, origin):
    if key not in values:
        raise ScenarioFormatError(f"{origin}: missing required field {key!r}")
    val, lineno = values.pop(key)
    try:
        return float(val)
    except ValueError as exc:
        raise ScenarioFormatError(
            f"{origin}:{lineno}: field {key} is not a number: {val!r}") from exc


def _pop_vector(values, key, origin):
    if key not in values:
        raise ScenarioFormatError(f"{origin}: missing required field {key!r}")
    val, lineno = values.pop(key)
    parts = val.split()
    if len(parts) != 3:
        raise ScenarioFormatError(
            f"{origin}:{lineno}: field {key} needs 3 components, got {val!r}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ScenarioFormatError(
            f"{origin}:{lineno}: field {key} is not numeric: {val!r}") from exc


def parse_scenario_text(text, origin="<string>"):
    values = _parse_lines(text, origin)
    if "name" not in values:
        raise ScenarioFormatError(f"{origin}: missing required field 'name'")
    name = values.pop("name")[0]
    scalars = {k: _pop_scalar(values, k, origin) for k in _SCALAR_KEYS}
    vectors = {k: _pop_vector(values, k, origin) for k in _VECTOR_KEYS}

    has_days = "tof_days" in values
    has_tu = "tof_tu" in values
    if has_days and has_tu:
        raise ScenarioFormatError(
            f"{origin}: give exactly one of tof_days or tof_tu, not both")
    if has_days:
        tof = (_pop_scalar(values, "tof_days", origin) * SECONDS_PER_DAY
               / scalars["time_unit_s"])
    elif has_tu:
        tof = _pop_scalar(values, "tof_tu", origin)
    else:
        raise ScenarioFormatError(
            f"{origin}: missing time of flight (tof_days or tof_tu)")
    if tof <= 0:
        raise ScenarioFormatError(f"{origin}: time of flight must be positive")

    g0 = 9.81
    if "g0_mps2" in values:
        g0 = _pop_scalar(values, "g0_mps2", origin)
    if values:
        unknown = ", ".join(sorted(values))
        raise ScenarioFormatError(f"{origin}: unknown field(s): {unknown}")

    constants = SystemConstants(
        mu=scalars["mass_parameter"], tu=scalars["time_unit_s"],
        lu=scalars["length_unit_km"], vu=scalars["velocity_unit_kmps"],
        mu_mass=scalars["initial_mass_kg"])
    spacecraft = SpacecraftParams(
        m_i=scalars["initial_mass_kg"], t_max=scalars["max_thrust_n"],
        isp=scalars["specific_impulse_s"], constants=constants, g0=g0)
    for key in _VECTOR_KEYS:
        if not np.all(np.isfinite(vectors[key])):
            raise ScenarioFormatError(f"{origin}: non-finite {key}")
    return Scenario(name=name, constants=constants, spacecraft=spacecraft,
                    r_i=vectors["r_i_lu"], v_i=vectors["v_i_vu"],
                    r_f=vectors["r_f_lu"], v_f=vectors["v_f_vu"], tof=tof)


def parse_scenario(path):
    """Load and validate a scenario configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario_text(fh.read(), origin=str(path))


def serialize_scenario(scn: Scenario):
    """Full-precision flat text form; parse(serialize(s)) == s."""
    lines = [f"name = {scn.name}"]
    k = scn.constants
    lines.append(f"mass_parameter = {k.mu!r}")
    lines.append(f"time_unit_s = {k.tu!r}")
    lines.append(f"length_unit_km = {k.lu!r}")
    lines.append(f"velocity_unit_kmps = {k.vu!r}")
    lines.append(f"initial_mass_kg = {scn.spacecraft.m_i!r}")
    lines.append(f"max_thrust_n = {scn.spacecraft.t_max!r}")
    lines.append(f"specific_impulse_s = {scn.spacecraft.isp!r}")
    lines.append(f"g0_mps2 = {scn.spacecraft.g0!r}")
    lines.append(f"tof_tu = {scn.tof!r}")
    for key, vec in (("r_i_lu", scn.r_i), ("v_i_vu", scn.v_i),
                     ("r_f_lu", scn.r_f), ("v_f_vu", scn.v_f)):
        lines.append(f"{key} = {vec[0]!r} {vec[1]!r} {vec[2]!r}")
    return "\n".join(lines) + "\n"


def builtin_scenario_path(name):
    """Filesystem path of a scenario file shipped with the package."""
    res = importlib.resources.files("lowthrust.data") / f"{name}.cfg"
    if not res.is_file():
        raise FileNotFoundError(f"no built-in scenario named {name!r}")
    return res


def load_scenario(name_or_path):
    """Resolve a built-in scenario name or a path to a scenario file."""
    import os
    if os.path.exists(name_or_path):
        return parse_scenario(name_or_path)
    try:
        res = builtin_scenario_path(str(name_or_path))
    except FileNotFoundError:
        raise ScenarioFormatError(
            f"scenario {name_or_path!r}: no such file or built-in name")
    return parse_scenario_text(res.read_text(encoding="utf-8"),
                               origin=str(res))
