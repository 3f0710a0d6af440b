"""Run configuration: an INI file with fixed sections and keys, plus overrides."""
from __future__ import annotations

import configparser
from dataclasses import dataclass

from .analysis import SLOPE_SLACK
from .exterior_solver import MfsParams
from .field import QuadratureSpec, VorticitySpec
from .geometry import LatticeParams, ObstacleShape


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict[str, str]] = {
    "domain": {"eps": "0.1", "alpha": "1.0", "mu": "0.0", "shape": "disk", "ellipse_p": "1.0",
               "ellipse_q": "0.5", "cutoff_profile": "quintic"},
    "field": {"kind": "radial_bump", "center_x": "0.5", "center_y": "0.55", "r0": "0.3",
              "amplitude": "1.0", "m0": "10.0"},
    "quadrature": {"scheme": "tensor_gauss", "order": "16", "samples": "200000",
                   "singularity_handling": "polar_split"},
    "mfs": {"m": "64", "rho": "0.5", "tol_bc": "1e-8", "svd_cutoff": "1e-12", "max_unknowns": "40000"},
    "transport": {"h": "0.02", "dt": "0.02", "t_end": "1.0", "backend": "corrector", "blob_ratio": "2.0",
                  "stride": "10"},
    "study": {"eps_list": "0.1, 0.05, 0.025, 0.0125", "slack": str(SLOPE_SLACK), "window": "-0.25, 1.25, -0.25, 1.0",
              "grid": "0.0, 1.0, 0.0, 1.0, 11, 11", "provenance": "corrector", "seed": "0",
              "output_dir": "out", "threads": "0"},
}


def _floats(text: str, n: int | None = None, key: str = "") -> list[float]:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a comma-separated list of numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"{key}: expected {n} numbers, got {len(vals)}")
    return vals


@dataclass
class RunConfig:
    values: dict[str, dict[str, str]]

    @classmethod
    def load(cls, path=None, overrides: dict[str, str] | None = None) -> "RunConfig":
        vals = {s: dict(kv) for s, kv in DEFAULTS.items()}
        if path is not None:
            cp = configparser.ConfigParser(interpolation=None)
            try:
                with open(path, encoding="utf-8") as fh:
                    cp.read_file(fh)
            except (OSError, configparser.Error) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            for sec in cp.sections():
                if sec not in vals:
                    raise ConfigError(f"unknown section [{sec}]")
                for key, v in cp.items(sec):
                    if key not in vals[sec]:
                        raise ConfigError(f"unknown key {key!r} in section [{sec}]")
                    vals[sec][key] = v.strip()
        for dotted, v in (overrides or {}).items():
            sec, _, key = dotted.partition(".")
            if sec not in vals or key not in vals[sec]:
                raise ConfigError(f"unknown key {dotted!r}")
            vals[sec][key] = str(v)
        cfg = cls(vals)
        cfg.validate()
        return cfg

    def get(self, sec, key) -> str:
        return self.values[sec][key]

    def num(self, sec, key, kind=float):
        try:
            return kind(float(self.values[sec][key])) if kind is int else kind(self.values[sec][key])
        except ValueError as exc:
            raise ConfigError(f"{sec}.{key}: cannot parse {self.values[sec][key]!r}") from exc

    # -- typed views -------------------------------------------------------
    def lattice(self) -> LatticeParams:
        return LatticeParams(self.num("domain", "eps"), self.num("domain", "alpha"), self.num("domain", "mu"))

    def shape(self) -> ObstacleShape:
        kind = self.get("domain", "shape")
        if kind == "disk":
            return ObstacleShape.disk()
        return ObstacleShape(kind, self.num("domain", "ellipse_p"), self.num("domain", "ellipse_q"))

    def vorticity(self) -> VorticitySpec:
        c = complex(self.num("field", "center_x"), self.num("field", "center_y"))
        return VorticitySpec(self.get("field", "kind"), c, self.num("field", "r0"), self.num("field", "amplitude"))

    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(self.get("quadrature", "scheme"), self.num("quadrature", "order", int),
                              self.num("quadrature", "samples", int), self.get("quadrature", "singularity_handling"),
                              self.num("study", "seed", int))

    def mfs(self) -> MfsParams:
        return MfsParams(self.num("mfs", "m", int), self.num("mfs", "rho"), self.num("mfs", "tol_bc"),
                         self.num("mfs", "svd_cutoff"), self.num("mfs", "max_unknowns", int))

    def eps_list(self) -> list[float]:
        return _floats(self.get("study", "eps_list"), key="study.eps_list")

    def window(self) -> tuple[float, float, float, float]:
        return tuple(_floats(self.get("study", "window"), 4, "study.window"))

    def grid(self):
        g = _floats(self.get("study", "grid"), 6, "study.grid")
        return g[0], g[1], g[2], g[3], int(g[4]), int(g[5])

    def validate(self) -> None:
        """Build every typed view once so bad values fail before any work starts."""
        try:
            self.lattice()
            self.shape()
            f = self.vorticity()
            self.quadrature()
            self.mfs()
            self.eps_list()
            self.window()
            self.grid()
            for key in ("h", "dt", "t_end", "blob_ratio"):
                self.num("transport", key)
            self.num("transport", "stride", int)
            self.num("study", "threads", int)
            self.num("study", "slack")
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.get("transport", "backend") not in ("plane", "corrector", "mfs"):
            raise ConfigError(f"transport.backend: unknown backend {self.get('transport', 'backend')!r}")
        if max(f.l1_norm, f.linf_norm) > self.num("field", "m0"):
            raise ConfigError("field: vorticity exceeds the bound m0")

    def dump(self) -> str:
        lines = []
        for sec in DEFAULTS:
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in self.values[sec].items()]
            lines.append("")
        return "\n".join(lines)
