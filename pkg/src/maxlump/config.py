"""Scenario configuration files: flat ``key = value`` text with sections.

Example::

    [mesh]
    kind = quad          # quad | tri | hybrid | file
    nx = 32
    ny = 32
    bbox = -1 -1 1 1
    refine = 0
    # path = data/scatter_disk.mesh   (with kind = file)

    [materials]
    eps = 1.0            # scalar or 'e11 e12 e22'
    mu = 1.0
    region.2.eps = 3.0   # override by element region tag

    [time]
    t_end = 1.6
    cfl_fraction = 0.9   # or dt = 0.01 for an explicit step

    [source]
    type = plane_wave    # none | plane_wave
    amplitude = 1.0
    omega = 12.566370614359172
    center_time = 0.35
    width = 0.12
    x_min = -0.95
    x_max = -0.85
    polarization = y

    [output]
    directory = out
    prefix = run
    snapshot_stride = 20
    figures = true

    [probes]
    p1 = -0.2 0.0
    p2 = 0.4 0.0

    [scenario]
    name = scattering
    reference = cavity   # cavity | self  (converge command)
    cavity_m = 1
    cavity_n = 1
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised on invalid or inconsistent configuration input."""


@dataclass
class SimConfig:
    mesh_kind: str = "quad"
    nx: int = 16
    ny: int = 16
    bbox: tuple = (0.0, 0.0, 1.0, 1.0)
    mesh_path: str | None = None
    refine: int = 0

    default_eps: object = 1.0
    default_mu: float = 1.0
    eps_by_tag: dict = field(default_factory=dict)
    mu_by_tag: dict = field(default_factory=dict)

    t_end: float = 1.0
    dt: float | None = None
    cfl_fraction: float = 0.9

    source_type: str = "none"
    source_amplitude: float = 1.0
    source_omega: float = 4.0 * np.pi
    source_center_time: float = 0.35
    source_width: float = 0.12
    source_x_min: float = 0.0
    source_x_max: float = 0.05
    source_polarization: str = "y"

    output_directory: str = "out"
    output_prefix: str = "run"
    snapshot_stride: int = 0
    figures: bool = False

    probes: list = field(default_factory=list)

    name: str = "scenario"
    reference: str = "cavity"
    cavity_m: int = 1
    cavity_n: int = 1

    def validate(self):
        if self.mesh_kind not in ("quad", "tri", "hybrid", "file"):
            raise ConfigError(f"unknown mesh kind {self.mesh_kind!r}")
        if self.mesh_kind == "file" and not self.mesh_path:
            raise ConfigError("mesh kind 'file' requires a path")
        if self.mesh_kind != "file" and (self.nx < 1 or self.ny < 1):
            raise ConfigError("grid counts must be positive")
        if self.refine < 0:
            raise ConfigError("refine must be >= 0")
        if self.t_end <= 0.0:
            raise ConfigError("t_end must be positive")
        if self.dt is not None and self.dt <= 0.0:
            raise ConfigError("explicit dt must be positive")
        if not 0.0 < self.cfl_fraction <= 1.0:
            raise ConfigError("cfl_fraction must lie in (0, 1]")
        if self.source_type not in ("none", "plane_wave"):
            raise ConfigError(f"unknown source type {self.source_type!r}")
        if self.source_polarization not in ("x", "y"):
            raise ConfigError("polarization must be 'x' or 'y'")
        if self.snapshot_stride < 0:
            raise ConfigError("snapshot_stride must be >= 0")
        if self.reference not in ("cavity", "self"):
            raise ConfigError("reference must be 'cavity' or 'self'")
        return self


def _parse_eps(text):
    parts = text.split()
    if len(parts) == 1:
        return float(parts[0])
    if len(parts) == 3:
        e11, e12, e22 = (float(p) for p in parts)
        return np.array([[e11, e12], [e12, e22]])
    raise ConfigError(f"eps must be a scalar or 'e11 e12 e22', got {text!r}")


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_config(stream):
    """Parse a configuration stream into a validated :class:`SimConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_file(stream)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    cfg = SimConfig()
    try:
        if parser.has_section("mesh"):
            sec = parser["mesh"]
            cfg.mesh_kind = sec.get("kind", cfg.mesh_kind).strip()
            cfg.nx = int(sec.get("nx", cfg.nx))
            cfg.ny = int(sec.get("ny", cfg.ny))
            if "bbox" in sec:
                vals = [float(v) for v in sec["bbox"].split()]
                if len(vals) != 4:
                    raise ConfigError("bbox needs 4 numbers: x0 y0 x1 y1")
                cfg.bbox = tuple(vals)
            cfg.mesh_path = sec.get("path", cfg.mesh_path)
            cfg.refine = int(sec.get("refine", cfg.refine))
        if parser.has_section("materials"):
            for key, value in parser["materials"].items():
                if key == "eps":
                    cfg.default_eps = _parse_eps(value)
                elif key == "mu":
                    cfg.default_mu = float(value)
                elif key.startswith("region."):
                    parts = key.split(".")
                    if len(parts) != 3 or parts[2] not in ("eps", "mu"):
                        raise ConfigError(f"bad material key {key!r}")
                    tag = int(parts[1])
                    if parts[2] == "eps":
                        cfg.eps_by_tag[tag] = _parse_eps(value)
                    else:
                        cfg.mu_by_tag[tag] = float(value)
                else:
                    raise ConfigError(f"unknown material key {key!r}")
        if parser.has_section("time"):
            sec = parser["time"]
            cfg.t_end = float(sec.get("t_end", cfg.t_end))
            if "dt" in sec and sec["dt"].strip() != "auto":
                cfg.dt = float(sec["dt"])
            cfg.cfl_fraction = float(sec.get("cfl_fraction", cfg.cfl_fraction))
        if parser.has_section("source"):
            sec = parser["source"]
            cfg.source_type = sec.get("type", cfg.source_type).strip()
            cfg.source_amplitude = float(sec.get("amplitude",
                                                 cfg.source_amplitude))
            cfg.source_omega = float(sec.get("omega", cfg.source_omega))
            cfg.source_center_time = float(sec.get("center_time",
                                                   cfg.source_center_time))
            cfg.source_width = float(sec.get("width", cfg.source_width))
            cfg.source_x_min = float(sec.get("x_min", cfg.source_x_min))
            cfg.source_x_max = float(sec.get("x_max", cfg.source_x_max))
            cfg.source_polarization = sec.get("polarization",
                                              cfg.source_polarization).strip()
        if parser.has_section("output"):
            sec = parser["output"]
            cfg.output_directory = sec.get("directory", cfg.output_directory)
            cfg.output_prefix = sec.get("prefix", cfg.output_prefix)
            cfg.snapshot_stride = int(sec.get("snapshot_stride",
                                              cfg.snapshot_stride))
            if "figures" in sec:
                cfg.figures = _parse_bool(sec["figures"])
        if parser.has_section("probes"):
            for key, value in parser["probes"].items():
                vals = [float(v) for v in value.split()]
                if len(vals) != 2:
                    raise ConfigError(f"probe {key!r} needs 'x y'")
                cfg.probes.append((key, vals[0], vals[1]))
        if parser.has_section("scenario"):
            sec = parser["scenario"]
            cfg.name = sec.get("name", cfg.name).strip()
            cfg.reference = sec.get("reference", cfg.reference).strip()
            cfg.cavity_m = int(sec.get("cavity_m", cfg.cavity_m))
            cfg.cavity_n = int(sec.get("cavity_n", cfg.cavity_n))
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {exc}") from exc
    return cfg.validate()


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh)
