"""Flat ``key = value`` run configuration.

Keys carry section prefixes (``family.alpha = 1.75``).  Files are read line
by line; ``#`` starts a comment.  Manifests written by the CLI are valid
config files: their ``manifest.*`` and ``result.*`` keys are skipped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ConfigError
from .gfunction import (
    DEFAULT_DELTA,
    Bernoulli,
    GFunction,
    LongRangeAdditive,
    example_finite_range,
    read_table_csv,
)
from .shift_core import Alphabet, CylinderFunction, parse_word

RESERVED_PREFIXES = ("manifest.", "result.")
FAMILIES = ("bernoulli", "finite_range", "fixture", "long_range")


def _int(lo: int, hi: int) -> Callable[[str], int]:
    def conv(text: str) -> int:
        v = int(text)
        if not lo <= v <= hi:
            raise ValueError(f"must lie in [{lo}, {hi}]")
        return v
    return conv


def _float(lo: float = -math.inf, hi: float = math.inf, open_lo: bool = False) -> Callable[[str], float]:
    def conv(text: str) -> float:
        v = float(text)
        if not math.isfinite(v) or v > hi or v < lo or (open_lo and v == lo):
            raise ValueError(f"must lie in {'(' if open_lo else '['}{lo}, {hi}]")
        return v
    return conv


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _symbols(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _family(text: str) -> str:
    if text not in FAMILIES:
        raise ValueError(f"must be one of {', '.join(FAMILIES)}")
    return text


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError("must be true or false")


# key -> (converter, default as text)
SCHEMA: dict[str, tuple[Callable[[str], Any], Optional[str]]] = {
    "experiment": (str, "run"),
    "seed": (_int(0, 2**64 - 1), "0"),
    "out": (str, "."),
    "workers": (_int(1, 256), "1"),
    "family.name": (_family, "fixture"),
    "family.p": (_floats, "0.3,0.7"),
    "family.alphabet": (_int(2, 16), "2"),
    "family.table": (str, None),
    "family.alpha": (_float(1.0, 100.0, open_lo=True), "1.75"),
    "family.c": (_float(0.0, 1.0, open_lo=True), "0.05"),
    "family.sign": (_floats, None),
    "family.delta": (_float(0.0, 0.5, open_lo=True), str(DEFAULT_DELTA)),
    "family.anchor": (_symbols, "0"),
    "run.horizon": (_int(1, 10**7), "1000"),
    "run.n_steps": (_int(1, 10**6), "200"),
    "run.depth": (_int(1, 26), "10"),
    "run.f": (str, "indicator:1"),
    "run.replicas": (_int(1, 10**6), "1000"),
    "run.length": (_int(1, 10**6), "1000"),
    "run.burn_in": (_int(0, 10**6), "100"),
    "run.window": (_int(1, 4096), "64"),
    "run.measure_depth": (_int(0, 20), "2"),
    "run.K_grid": (_floats, "1,2,4,8"),
    "run.tol": (_float(0.0, 1.0, open_lo=True), "1e-13"),
    "run.max_iters": (_int(1, 10**8), "100000"),
    "run.anchor_tilde": (_symbols, "1"),
    "run.rate_floor": (_float(0.0, 1.0), "1e-12"),
    "run.profile": (str, None),
    "run.save_paths": (_bool, "false"),
    "run.save_traces": (_bool, "true"),
}


def parse_lines(text: str, source: str = "<config>") -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith(RESERVED_PREFIXES):
            continue
        raw[key] = value
    return raw


@dataclass
class RunConfig:
    """Validated configuration; ``values`` maps every schema key to its typed value."""

    values: dict[str, Any]
    raw: dict[str, str]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @classmethod
    def from_sources(cls, path: Optional[str] = None,
                     overrides: Optional[dict[str, str]] = None) -> RunConfig:
        raw: dict[str, str] = {}
        if path is not None:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            raw.update(parse_lines(text, str(path)))
        raw.update(overrides or {})
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        full = {k: d for k, (_, d) in SCHEMA.items() if d is not None}
        full.update(raw)
        values: dict[str, Any] = {k: None for k in SCHEMA}
        for key, text in full.items():
            conv = SCHEMA[key][0]
            try:
                values[key] = conv(text)
            except ValueError as exc:
                raise ConfigError(f"{key} = {text!r}: {exc}") from None
        if values["family.name"] == "finite_range" and not values["family.table"]:
            raise ConfigError("family.name = finite_range needs family.table (CSV path)")
        grid = values["run.K_grid"]
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("run.K_grid must be a strictly increasing list")
        return cls(values, full)

    def echo(self) -> list[tuple[str, str]]:
        return [(k, self.raw[k]) for k in SCHEMA if k in self.raw]

    def build_spec(self) -> GFunction:
        name = self["family.name"]
        delta, anchor = self["family.delta"], self["family.anchor"]
        if name == "bernoulli":
            return Bernoulli(self["family.p"], delta=delta, anchor=anchor)
        if name == "fixture":
            return example_finite_range(delta=delta, anchor=anchor)
        if name == "finite_range":
            return read_table_csv(self["family.table"], delta=delta, anchor=anchor)
        return LongRangeAdditive(Alphabet(self["family.alphabet"]), self["family.alpha"],
                                 self["family.c"], sign=self["family.sign"],
                                 delta=delta, anchor=anchor)


def parse_function(text: str, alphabet: Alphabet) -> CylinderFunction:
    """``indicator:<word>``, ``coordinate`` or ``const:<value>``."""
    kind, _, arg = text.partition(":")
    if kind == "indicator":
        return CylinderFunction.indicator(alphabet, parse_word(arg, alphabet))
    if kind == "coordinate":
        return CylinderFunction.coordinate(alphabet)
    if kind == "const":
        try:
            return CylinderFunction.constant(alphabet, float(arg))
        except ValueError:
            raise ConfigError(f"bad constant in run.f = {text!r}") from None
    raise ConfigError(f"run.f = {text!r}: expected indicator:<word>, coordinate or const:<value>")
