"""INI run configuration with line/column error reporting."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigurationError

SECTIONS = ("domain", "grid", "solver", "run", "output")


@dataclass
class RunConfig:
    domain: dict
    cells: int = 128
    spacing: Optional[float] = None
    solver_spacing: Optional[float] = None
    tol: float = 1e-8
    max_iter: int = 500
    p: float = 2.0
    q: Optional[float] = None
    seed: int = 0
    trials: int = 20
    lambda_mode: str = "auto"
    slice_axis: int = 2
    slice_index: Optional[int] = None
    source: str = "<defaults>"
    positions: dict = field(default_factory=dict, repr=False)

    def where(self, section, key):
        """(line, column) of a key's value, or of the section header, when known."""
        if (section, key) in self.positions:
            return self.positions[(section, key)]
        return self.positions.get((section, None), (None, None))

    def error(self, section, key, msg):
        line, col = self.where(section, key)
        return ConfigurationError(msg, line, col)


def _scan_positions(text):
    pos, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and "]" in s:
            section = s[1:s.index("]")].strip()
            pos[(section, None)] = (i, raw.index("[") + 1)
            continue
        for sep in ("=", ":"):
            if sep in raw:
                key = raw.split(sep, 1)[0].strip()
                after = raw.index(sep) + 1
                col = after + len(raw[after:]) - len(raw[after:].lstrip()) + 1
                pos[(section, key)] = (i, col)
                break
    return pos


def parse_config(text, source="<string>"):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigurationError("missing section header", exc.lineno, 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigurationError(f"duplicate section [{exc.section}]", exc.lineno, 1) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigurationError(f"duplicate key {exc.option!r}", exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigurationError(f"cannot parse {line.strip()!r}", lineno, 1) from None
    pos = _scan_positions(text)
    for sec in parser.sections():
        if sec not in SECTIONS:
            line, col = pos.get((sec, None), (None, None))
            raise ConfigurationError(f"unknown section [{sec}]", line, col)
    if not parser.has_section("domain") or "kind" not in parser["domain"]:
        line, col = pos.get(("domain", None), (1, 1))
        raise ConfigurationError("[domain] needs a 'kind'", line, col)
    cfg = RunConfig(domain=dict(parser["domain"]), source=source, positions=pos)

    def get(section, key, conv, attr):
        if parser.has_section(section) and key in parser[section]:
            raw = parser[section][key]
            try:
                setattr(cfg, attr, conv(raw))
            except (TypeError, ValueError):
                raise cfg.error(section, key, f"{key}: cannot read {raw!r} as {conv.__name__}") from None

    known = {
        "grid": {"cells": (int, "cells"), "spacing": (float, "spacing"),
                 "slice_axis": (int, "slice_axis"), "slice_index": (int, "slice_index")},
        "solver": {"spacing": (float, "solver_spacing"), "tol": (float, "tol"),
                   "max_iter": (int, "max_iter")},
        "run": {"p": (float, "p"), "q": (float, "q"), "seed": (int, "seed"),
                "trials": (int, "trials"), "lambda_mode": (str, "lambda_mode")},
        "output": {},
    }
    for sec, keys in known.items():
        if not parser.has_section(sec):
            continue
        for key in parser[sec]:
            if key not in keys:
                raise cfg.error(sec, key, f"unknown key {key!r} in [{sec}]")
            conv, attr = keys[key]
            get(sec, key, conv, attr)
    if cfg.p <= 1:
        raise cfg.error("run", "p", "p must exceed 1")
    if cfg.cells < 8:
        raise cfg.error("grid", "cells", "cells must be at least 8")
    if cfg.lambda_mode not in ("auto", "analytic", "grid"):
        raise cfg.error("run", "lambda_mode", "lambda_mode must be auto, analytic or grid")
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ConfigurationError(f"config {path} is not UTF-8") from None
    return parse_config(text, str(path))
