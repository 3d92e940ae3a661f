"""Run configuration: INI files with unit-suffixed physical values.

Every dimensioned value must carry one of the accepted unit suffixes and is
converted to the internal units (ps, GHz, ueV, counts/s, rad).
Dimensionless values must not carry a suffix.
"""

import configparser
import io
import re
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from ._validation import ConfigurationError, ValidationError
from .optics import PHASE_MATCH_TOLERANCE, TIMEBIN_LABELS, AMZIParams, BSMConfig, DetectorParams
from .source import PULSE_SHAPES, ClockConfig, QDParams

PRESETS = ("emission", "entanglement", "teleport_superposition", "teleport_timebin")

UNITS = {
    "time": {"ps": 1.0, "ns": 1e3, "us": 1e6},
    "energy": {"ueV": 1.0, "meV": 1e3},
    "frequency": {"GHz": 1.0, "MHz": 1e-3},
    "rate": {"Hz": 1.0, "cps": 1.0, "kHz": 1e3, "MHz": 1e6},
    "angle": {"rad": 1.0, "deg": np.pi / 180.0},
}

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^\s*({_NUMBER})\s*([A-Za-z]*)\s*$")


def parse_quantity(text, kind, where):
    """Parse ``"<number> <unit>"`` for a dimension ``kind`` into internal units."""
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigurationError(f"{where}: cannot parse {text!r} as a number")
    value, unit = float(m.group(1)), m.group(2)
    if kind == "scalar":
        if unit:
            raise ConfigurationError(f"{where}: dimensionless value must not carry a unit ({unit!r})")
        return value
    table = UNITS[kind]
    if not unit:
        raise ConfigurationError(f"{where}: missing unit, expected one of {sorted(table)}")
    if unit not in table:
        raise ConfigurationError(f"{where}: unit {unit!r} not valid here, expected one of {sorted(table)}")
    return value * table[unit]


def _parse_int(text, where):
    try:
        value = float(text)
    except ValueError:
        raise ConfigurationError(f"{where}: expected an integer, got {text!r}") from None
    if not value.is_integer():
        raise ConfigurationError(f"{where}: expected an integer, got {text!r}")
    return int(value)


def _parse_bool(text, where):
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigurationError(f"{where}: expected true/false, got {text!r}")


def _parse_list(text, kind, where):
    return tuple(parse_quantity(p, kind, where) for p in text.split(",") if p.strip())


@dataclass
class LaserConfig:
    state: str = "e+l"
    mean_photon: float = 0.1
    offset: float = 0.0  # ps, pulse centre relative to the excitation pulse


@dataclass
class AnalysisConfig:
    g2_bin: float = 40.0
    g2_range: float = 50_000.0
    g2_zero_window: float = 0.0  # ps; 0 selects half a clock period
    grid_bin: float = 40.0
    grid_blocks: int = 5
    lifetime_bin: float = 16.0
    tomo_window: float = 96.0
    tomo_center: float = 0.0
    series_step: float = 16.0
    series_start: float = -96.0
    series_stop: float = 2000.0
    bootstrap: int = 20
    herald_window: float = 500.0
    charlie_gate: float = 0.0  # ps; clock-phase gate on Charlie clicks around the laser slot, 0 = off
    g3_bin: float = 4.0
    bob_min: float = -1000.0
    bob_max: float = 1000.0
    fidelity_window: float = 228.0
    sweep_widths: tuple = (85.0, 96.0, 228.0)


@dataclass
class OutputConfig:
    write_tags: bool = True


@dataclass
class ExperimentConfig:
    preset: str
    seed: int
    clock: ClockConfig
    qd: QDParams
    detector: DetectorParams
    detector_overrides: dict = field(default_factory=dict)
    amzi_alice: AMZIParams = None
    amzi_charlie: AMZIParams = None
    amzi_bob: AMZIParams = None
    bsm: BSMConfig = None
    laser: LaserConfig = None
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def detector_for(self, channel):
        return self.detector_overrides.get(int(channel), self.detector)

    def to_dict(self):
        """Canonical echo in internal units; the basis of the report hash."""
        out = {"preset": self.preset, "seed": self.seed}
        for name in ("clock", "qd", "detector", "amzi_alice", "amzi_charlie", "amzi_bob", "bsm",
                     "laser", "analysis", "output"):
            obj = getattr(self, name)
            out[name] = None if obj is None else _plain(asdict(obj))
        out["detector_overrides"] = {str(k): _plain(asdict(v)) for k, v in sorted(self.detector_overrides.items())}
        return out


def _plain(d):
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


# schema: section -> key -> (dimension, field name)
_CLOCK = {"repetition_rate": "frequency", "pulse_fwhm": "time", "n_cycles": "int", "epoch": "time",
          "pulse_shape": "str"}
_QD = {"lifetime_xx": "time", "lifetime_x": "time", "fss": "energy", "p_excite": "scalar",
       "p_reexcite": "scalar", "shelving_prob": "scalar", "shelving_lifetime": "time",
       "background_rate": "rate", "hv_coherence_floor": "scalar", "purity": "scalar",
       "single_emitter": "bool"}
_DETECTOR = {"jitter_sigma": "time", "efficiency": "scalar", "dark_rate": "rate", "dead_time": "time"}
_AMZI = {"delay": "time", "phase": "angle", "insertion_loss": "scalar"}
_BSM = {"visibility": "scalar", "coincidence_window": "time"}
_LASER = {"state": "str", "mean_photon": "scalar", "offset": "time"}
_ANALYSIS = {"g2_bin": "time", "g2_range": "time", "g2_zero_window": "time", "grid_bin": "time",
             "grid_blocks": "int", "lifetime_bin": "time", "tomo_window": "time", "tomo_center": "time",
             "series_step": "time", "series_start": "time", "series_stop": "time", "bootstrap": "int",
             "herald_window": "time", "charlie_gate": "time", "g3_bin": "time", "bob_min": "time",
             "bob_max": "time", "fidelity_window": "time", "sweep_widths": "time_list"}
_OUTPUT = {"write_tags": "bool"}
_RUN = {"preset": "str", "seed": "int"}

_SECTIONS = {"run": _RUN, "clock": _CLOCK, "qd": _QD, "detectors": _DETECTOR, "amzi.alice": _AMZI,
             "amzi.charlie": _AMZI, "amzi.bob": _AMZI, "bsm": _BSM, "laser": _LASER,
             "analysis": _ANALYSIS, "output": _OUTPUT}

_REQUIRED = {
    "emission": ("run", "clock", "qd", "detectors"),
    "entanglement": ("run", "clock", "qd", "detectors"),
    "teleport_superposition": ("run", "clock", "qd", "detectors", "laser", "bsm", "amzi.alice",
                               "amzi.charlie"),
    "teleport_timebin": ("run", "clock", "qd", "detectors", "laser", "bsm", "amzi.alice",
                         "amzi.charlie", "amzi.bob"),
}


def _convert(text, kind, where):
    if kind == "str":
        return text.strip()
    if kind == "int":
        return _parse_int(text, where)
    if kind == "bool":
        return _parse_bool(text, where)
    if kind == "time_list":
        return _parse_list(text, "time", where)
    return parse_quantity(text, kind, where)


def _read_parser(source):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        if isinstance(source, str) and "\n" in source:
            parser.read_string(source)
        else:
            with open(source) as fh:
                parser.read_file(fh)
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from None
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse config: {exc}".replace("\n", " ")) from None
    return parser


def _section_values(parser, name, schema, diagnostics):
    values = {}
    if not parser.has_section(name):
        return values
    for key, text in parser.items(name):
        where = f"{name}.{key}"
        if key not in schema:
            diagnostics.append(f"{where}: unknown key")
            continue
        try:
            values[key] = _convert(text, schema[key], where)
        except ConfigurationError as exc:
            diagnostics.append(str(exc))
    return values


def _build(cls, values, section, diagnostics):
    try:
        return cls(**values)
    except (ValidationError, ConfigurationError, TypeError) as exc:
        msg = str(exc)
        # name the offending field with its section
        for key in values:
            if key in msg and not msg.startswith(section):
                msg = f"{section}.{key}: {msg}"
                break
        else:
            if not msg.startswith(section):
                msg = f"{section}: {msg}"
        diagnostics.append(msg)
        return None


def _parse(source, seed_override=None):
    parser = _read_parser(source)
    diagnostics = []
    for name in parser.sections():
        if name not in _SECTIONS and not re.fullmatch(r"detector\.\d+", name):
            diagnostics.append(f"{name}: unknown section")

    run = _section_values(parser, "run", _RUN, diagnostics)
    preset = run.get("preset")
    if preset is None:
        diagnostics.append("run.preset: missing")
    elif preset not in PRESETS:
        diagnostics.append(f"run.preset: must be one of {PRESETS}, got {preset!r}")
        preset = None
    seed = seed_override if seed_override is not None else run.get("seed")
    if seed is None:
        diagnostics.append("run.seed: missing")
    elif not 0 <= int(seed) < 2 ** 64:
        diagnostics.append("run.seed: must be a 64-bit unsigned integer")
    if preset:
        for sec in _REQUIRED[preset]:
            if not parser.has_section(sec):
                diagnostics.append(f"{sec}: section required by preset {preset!r}")

    clock_v = _section_values(parser, "clock", _CLOCK, diagnostics)
    if "pulse_shape" in clock_v and clock_v["pulse_shape"] not in PULSE_SHAPES:
        diagnostics.append(f"clock.pulse_shape: must be one of {PULSE_SHAPES}")
        clock_v.pop("pulse_shape")
    clock = _build(ClockConfig, clock_v, "clock", diagnostics)
    qd = _build(QDParams, _section_values(parser, "qd", _QD, diagnostics), "qd", diagnostics)
    det = _build(DetectorParams, _section_values(parser, "detectors", _DETECTOR, diagnostics),
                 "detectors", diagnostics)
    overrides = {}
    for name in parser.sections():
        m = re.fullmatch(r"detector\.(\d+)", name)
        if m and det is not None:
            vals = asdict(det)
            vals.update(_section_values(parser, name, _DETECTOR, diagnostics))
            built = _build(DetectorParams, vals, name, diagnostics)
            if built is not None:
                overrides[int(m.group(1))] = built

    amzi = {}
    for role, mode in (("alice", "pol_to_timebin"), ("charlie", "timebin_to_pol"), ("bob", "pol_to_timebin")):
        sec = f"amzi.{role}"
        if parser.has_section(sec):
            vals = _section_values(parser, sec, _AMZI, diagnostics)
            amzi[role] = _build(AMZIParams, dict(vals, mode=mode), sec, diagnostics)
    if amzi.get("alice") and amzi.get("charlie"):
        gap = abs(amzi["alice"].delay - amzi["charlie"].delay)
        if gap > PHASE_MATCH_TOLERANCE:
            diagnostics.append(
                f"amzi.charlie.delay: phase-matching error, decoder delay {amzi['charlie'].delay:g} ps "
                f"differs from encoder amzi.alice.delay {amzi['alice'].delay:g} ps by {gap:g} ps "
                f"(tolerance {PHASE_MATCH_TOLERANCE:g} ps)")

    bsm = None
    if parser.has_section("bsm"):
        bsm = _build(BSMConfig, _section_values(parser, "bsm", _BSM, diagnostics), "bsm", diagnostics)
    laser = None
    if parser.has_section("laser"):
        vals = _section_values(parser, "laser", _LASER, diagnostics)
        if "state" in vals and vals["state"] not in TIMEBIN_LABELS:
            diagnostics.append(f"laser.state: must be one of {sorted(TIMEBIN_LABELS)}")
        elif vals.get("mean_photon", 1.0) <= 0:
            diagnostics.append("laser.mean_photon: must be > 0")
        else:
            laser = LaserConfig(**vals)

    analysis_v = _section_values(parser, "analysis", _ANALYSIS, diagnostics)
    for key, value in analysis_v.items():
        values = value if isinstance(value, tuple) else (value,)
        if key in ("series_start", "bob_min", "tomo_center", "charlie_gate"):
            continue
        if key in ("g2_zero_window", "charlie_gate"):
            bad = any(v < 0 for v in values)
        else:
            bad = any(v <= 0 for v in values)
        if bad:
            diagnostics.append(f"analysis.{key}: must be positive")
    if analysis_v.get("bob_min", -1.0) >= analysis_v.get("bob_max", 1.0):
        diagnostics.append("analysis.bob_min: must be below analysis.bob_max")
    analysis = AnalysisConfig(**analysis_v)
    output = OutputConfig(**_section_values(parser, "output", _OUTPUT, diagnostics))

    cfg = None
    if not diagnostics:
        cfg = ExperimentConfig(preset, int(seed), clock, qd, det, overrides, amzi.get("alice"),
                               amzi.get("charlie"), amzi.get("bob"), bsm, laser, analysis, output)
    return cfg, diagnostics


def validate_config(source):
    """All diagnostics for a config file (empty list when valid). Never simulates."""
    return _parse(source)[1]


def load_config(source, seed=None):
    """Parse and validate; raises ConfigurationError listing every problem."""
    cfg, diagnostics = _parse(source, seed)
    if diagnostics:
        raise ConfigurationError("; ".join(diagnostics))
    return cfg


def preset_text(name):
    """Text of a shipped preset file."""
    try:
        return resources.files("qdrelay").joinpath("presets", f"{name}.cfg").read_text()
    except FileNotFoundError:
        raise ConfigurationError(f"unknown preset {name!r}") from None


def preset_names():
    folder = resources.files("qdrelay").joinpath("presets")
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".cfg"))


def with_overrides(source, overrides):
    """Config text with ``{"section.key": "value"}`` entries replaced or added.

    Values are raw config text (units included); ``None`` removes a key.
    """
    parser = _read_parser(source)
    for path, value in overrides.items():
        section, sep, key = path.rpartition(".")
        if not sep or not section:
            raise ConfigurationError(f"override {path!r}: expected section.key")
        if value is None:
            if parser.has_section(section):
                parser.remove_option(section, key)
            continue
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, str(value))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
