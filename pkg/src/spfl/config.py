"""Run configuration: sectioned key = value text with units in every key name."""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .detection import DetectorSpec, SourceSpec
from .dispersion import FiberSpec, LoopConfig
from .errors import InvalidArgument, InvalidConfiguration
from .spectral import FilterSpec, SpectralConfig

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "loop": {
        "nlf_length_m": (float, 300.0),
        "nlf_zdw_nm": (float, 1547.0),
        "smf1_length_m": (float, 3.0),
        "smf2_length_m": (float, 1.0),
        "smf_lambda_ref_nm": (float, 1547.5),
        "smf_beta2_ps2_per_m": (float, -0.02175),
        "smf_beta3_ps3_per_m": (float, 0.0),
        "phi_p1_rad": (float, 0.0),
        "phi_p2_rad": (float, 0.0),
    },
    "spectral": {
        "lambda_p0_nm": (float, 1547.5),
        "pump_pulse_ps": (float, 4.0),
        "pump_fwhm_nm": (float, 0.9),
        "f2_fwhm_nm": (float, 0.7),
        "f3_fwhm_nm": (float, 1.3),
        "filter_shape": (str, "rectangular"),
        "alpha_ps2": (float, 0.0435),
        "xi_same_cps": (float, 29.5),
        "xi_diff_cps": (float, 32.3),
        "quad_order": (int, 16),
    },
    "source": {
        "mu_per_gate": (float, 0.02),
        "pump_power_mw": (float, 0.23),
        "power_ref_mw": (float, 0.23),
        "gate_rate_hz": (float, 3.1e6),
        "rep_divisor": (int, 8),
    },
    "detectors": {
        "spd1_efficiency": (float, 0.10),
        "spd2_efficiency": (float, 0.10),
        "spd3_efficiency": (float, 0.10),
        "dark_prob_per_gate": (float, 5e-5),
        "gate_width_ns": (float, 2.5),
        "dead_time_us": (float, 10.0),
    },
    "run": {
        "seed": (int, 12345),
        "n_gates": (int, 10_000_000),
        "batch_size": (int, 1 << 20),
        "grid_start_nm": (float, 4.0),
        "grid_stop_nm": (float, 20.0),
        "grid_step_nm": (float, 0.2),
        "averaged": (bool, True),
        "power_delta_lambda_nm": (float, 10.75),
    },
}


def _parse_value(kind: type, text: str, where: str):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            v = float(text)
            if not math.isfinite(v):
                raise ValueError(text)
            return v
        return text
    except ValueError:
        raise InvalidConfiguration(f"{where}: cannot parse {text!r} as {kind.__name__}") from None


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class RunConfig:
    """Typed flat values keyed by (section, key); component objects are built on demand."""

    values: dict[tuple[str, str], object] = field(default_factory=dict)

    def __post_init__(self):
        full = {(s, k): d for s, keys in SCHEMA.items() for k, (_, d) in keys.items()}
        for key in self.values:
            if key not in full:
                raise InvalidConfiguration(f"unknown key {key[0]}.{key[1]}")
        full.update(self.values)
        self.values = full
        self.validate()

    def __getitem__(self, key: str):
        section, name = key.split(".", 1)
        return self.values[(section, name)]

    def replace(self, **updates) -> "RunConfig":
        """Copy with ``section__key=value`` overrides."""
        vals = dict(self.values)
        for k, v in updates.items():
            section, name = k.split("__", 1)
            if (section, name) not in vals:
                raise InvalidConfiguration(f"unknown key {section}.{name}")
            vals[(section, name)] = v
        return RunConfig(vals)

    # -- component objects ------------------------------------------------
    def loop(self) -> LoopConfig:
        g = self.__getitem__
        ref, b2, b3 = g("loop.smf_lambda_ref_nm"), g("loop.smf_beta2_ps2_per_m"), g("loop.smf_beta3_ps3_per_m")
        return LoopConfig(
            nlf=FiberSpec(g("loop.nlf_length_m"), g("loop.nlf_zdw_nm"), 0.0),
            smf1=FiberSpec(g("loop.smf1_length_m"), ref, b2, beta3=b3),
            smf2=FiberSpec(g("loop.smf2_length_m"), ref, b2, beta3=b3),
            phi_p1=g("loop.phi_p1_rad"), phi_p2=g("loop.phi_p2_rad"))

    def spectral(self) -> SpectralConfig:
        g = self.__getitem__
        lp, shape = g("spectral.lambda_p0_nm"), g("spectral.filter_shape")
        return SpectralConfig(
            lambda_p0=lp,
            pump_filter=FilterSpec(lp, g("spectral.pump_fwhm_nm"), shape),
            signal_filter=FilterSpec(lp, g("spectral.f2_fwhm_nm"), shape),
            idler_filter=FilterSpec(lp, g("spectral.f2_fwhm_nm"), shape),
            port_b_filter=FilterSpec(lp, g("spectral.f3_fwhm_nm"), shape),
            alpha=g("spectral.alpha_ps2"),
            xi_same=g("spectral.xi_same_cps"), xi_diff=g("spectral.xi_diff_cps"),
            quad_order=g("spectral.quad_order"))

    def source(self) -> SourceSpec:
        g = self.__getitem__
        return SourceSpec(g("source.mu_per_gate"), g("source.pump_power_mw"),
                          g("source.power_ref_mw"), g("source.gate_rate_hz"),
                          g("source.rep_divisor"))

    def detectors(self) -> tuple[DetectorSpec, DetectorSpec, DetectorSpec]:
        g = self.__getitem__
        return tuple(DetectorSpec(g(f"detectors.spd{k}_efficiency"),
                                  g("detectors.dark_prob_per_gate"),
                                  g("detectors.gate_width_ns"), g("detectors.dead_time_us"))
                     for k in (1, 2, 3))

    def grid(self) -> np.ndarray:
        return make_grid(self["run.grid_start_nm"], self["run.grid_stop_nm"],
                         self["run.grid_step_nm"])

    def validate(self) -> None:
        for section, build in (("loop", self.loop), ("spectral", self.spectral),
                               ("source", self.source), ("detectors", self.detectors)):
            try:
                build()
            except (InvalidArgument, InvalidConfiguration) as exc:
                raise InvalidConfiguration(f"[{section}] {exc}") from None
        for key in ("n_gates", "batch_size"):
            if self.values[("run", key)] <= 0:
                raise InvalidConfiguration(f"run.{key} must be positive")

    # -- text round trip --------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {_format_value(self.values[(section, k)])}" for k in keys)
            lines.append("")
        return "\n".join(lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                       interpolation=None, strict=True)
        cp.optionxform = str
        try:
            cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise InvalidConfiguration(f"{source}: {exc}") from None
        values = {}
        for section in cp.sections():
            if section not in SCHEMA:
                raise InvalidConfiguration(f"unknown section [{section}]")
            for key, raw in cp.items(section):
                if key not in SCHEMA[section]:
                    raise InvalidConfiguration(f"unknown key {section}.{key}")
                kind = SCHEMA[section][key][0]
                values[(section, key)] = _parse_value(kind, raw, f"{section}.{key}")
        return cls(values)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        """Load a config file; ``"setup"`` names the bundled fixture of the measured setup."""
        if str(path) == "setup":
            return cls.from_text(setup_config_text(), "setup.config")
        p = Path(path)
        return cls.from_text(p.read_text(), str(p))


def setup_config_text() -> str:
    return resources.files("spfl").joinpath("data/setup.config").read_text()


def make_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive start:stop:step grid, rounded to 1e-9 nm to keep outputs reproducible."""
    if not (step > 0 and stop >= start):
        raise InvalidArgument(f"empty grid {start}:{stop}:{step}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 9)
