"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .core import DomainError, DomainGeometry, ExteriorData, ProblemSpec, SourceSpec
from .kernels import Kernel, KernelError, OperatorSpec, physical_kernel, unit_kernel


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""


_DECIMAL = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_INTEGER = re.compile(r"[+-]?\d+")


def _float(text: str) -> float:
    if not _DECIMAL.fullmatch(text):
        raise ConfigError(f"not a decimal number: {text!r}")
    return float(text)


def _int(text: str) -> int:
    if not _INTEGER.fullmatch(text):
        raise ConfigError(f"not an integer: {text!r}")
    return int(text)


def _floats(text: str) -> tuple[float, ...]:
    parts = [t.strip() for t in text.split(",")]
    if not parts or any(not t for t in parts):
        raise ConfigError(f"not a list of decimals: {text!r}")
    return tuple(_float(t) for t in parts)


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ConfigError(f"{text!r} is not one of {', '.join(options)}")
        return text
    return parse


def _text(text: str) -> str:
    if not text:
        raise ConfigError("empty value")
    return text


# key -> (parser, default text)
SCHEMA: dict[str, tuple] = {
    "s": (_float, "0.75"),
    "p": (_float, "1.1"),
    "lambda": (_float, "0"),
    "domain.a": (_float, "-1"),
    "domain.b": (_float, "1"),
    "grid.n": (_int, "2000"),
    "grid.ratio": (_float, "1.03"),
    "grid.d_min": (_float, "1e-9"),
    "kernel.kind": (_choice("unit", "physical", "constant", "pucci_plus", "pucci_minus",
                            "sup_pair", "inf_pair"), "unit"),
    "kernel.gamma_lo": (_float, "1"),
    "kernel.gamma_hi": (_float, "1"),
    "source.kind": (_choice("zero", "constant", "power"), "zero"),
    "source.c": (_float, "0"),
    "source.kappa": (_float, "0"),
    "exterior.kind": (_choice("zero", "constant"), "zero"),
    "exterior.c": (_float, "0"),
    "case": (_choice("auto", "family", "scale_pos", "scale_neg"), "auto"),
    "t": (_floats, "1"),
    "tol": (_float, "1e-9"),
    "perron.n_first": (_float, "10"),
    "perron.n_last": (_float, "1e7"),
    "perron.per_decade": (_int, "2"),
    "out.dir": (_text, "out"),
}


def _render(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        resolved = {}
        for key, (parse, default) in SCHEMA.items():
            resolved[key] = self.values.get(key, parse(default))
        unknown = set(self.values) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
        object.__setattr__(self, "values", resolved)

    @classmethod
    def parse(cls, text: str = "", overrides=()) -> "ExperimentConfig":
        """Parse file text then ``key=value`` overrides; later wins."""
        cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), interpolation=None,
                                       empty_lines_in_values=False)
        cp.optionxform = str
        try:
            cp.read_string("[config]\n" + text)
        except configparser.Error as err:
            raise ConfigError(str(err)) from err
        extra = [sec for sec in cp.sections() if sec != "config"]
        if extra:
            raise ConfigError(f"section headers are not allowed: [{extra[0]}]")
        raw = dict(cp["config"])
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not key=value")
            raw[key.strip()] = value.strip()
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(unknown)}")
        vals = {}
        for key, text in raw.items():
            try:
                vals[key] = SCHEMA[key][0](text.strip())
            except ConfigError as err:
                raise ConfigError(f"{key}: {err}") from err
        return cls(vals)

    @classmethod
    def load(cls, path=None, overrides=()) -> "ExperimentConfig":
        text = "" if path is None else Path(path).read_text(encoding="utf-8")
        return cls.parse(text, overrides)

    def __getitem__(self, key: str):
        return self.values[key]

    def metadata(self) -> dict[str, str]:
        """Every resolved key, in schema order, as ``config.<key>``."""
        return {f"config.{k}": _render(v) for k, v in self.values.items()}

    # -- builders ---------------------------------------------------------

    def domain(self) -> DomainGeometry:
        v = self.values
        return DomainGeometry.interval(v["domain.a"], v["domain.b"], n=v["grid.n"],
                                       grading=v["grid.ratio"], d_min=v["grid.d_min"])

    def operator(self) -> OperatorSpec:
        v = self.values
        s, kind = v["s"], v["kernel.kind"]
        lo, hi = v["kernel.gamma_lo"], v["kernel.gamma_hi"]
        if kind == "unit":
            return OperatorSpec.linear(unit_kernel(s))
        if kind == "physical":
            return OperatorSpec.linear(physical_kernel(s))
        if kind == "constant":
            if lo != hi:
                raise ConfigError("constant kernel needs gamma_lo == gamma_hi")
            return OperatorSpec.linear(Kernel(s, lo))
        if kind in ("pucci_plus", "pucci_minus"):
            return OperatorSpec.pucci("+" if kind == "pucci_plus" else "-", s, lo, hi)
        if kind == "sup_pair":
            return OperatorSpec.infsup([[Kernel(s, lo), Kernel(s, hi)]])
        return OperatorSpec.infsup([[Kernel(s, lo)], [Kernel(s, hi)]])

    def source(self) -> SourceSpec:
        v = self.values
        if v["source.kind"] == "zero":
            return SourceSpec.zero()
        if v["source.kind"] == "constant":
            return SourceSpec.constant(v["source.c"])
        return SourceSpec.power_singular(v["source.c"], v["source.kappa"])

    def exterior(self) -> ExteriorData:
        v = self.values
        if v["exterior.kind"] == "zero" or v["exterior.c"] == 0.0:
            return ExteriorData.zero()
        return ExteriorData.constant(v["exterior.c"])

    def spec(self) -> ProblemSpec:
        v = self.values
        for key in ("s", "p", "lambda", "tol"):
            if not math.isfinite(v[key]):
                raise ConfigError(f"{key} must be finite")
        try:
            self.domain().node_boundary_distances()
            return ProblemSpec(v["s"], v["p"], v["lambda"], self.domain(), self.source(),
                               self.exterior(), self.operator())
        except (DomainError, KernelError) as err:
            raise ConfigError(str(err)) from err
