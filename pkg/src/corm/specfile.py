"""TOML specification files.

    dimension = 2                 # optional when marginals are listed

    [score]                       # iid scores ...
    family = "gamma"
    shape = 0.3
    rate = 1.0

    # ... or one table per coordinate
    # [[score.marginals]]
    # family = "beta"
    # alpha = 1.0
    # beta = 1.0

    [directing]
    family = "sigma_stable"       # sigma_stable_normalized, gamma_process, finite_exponential
    sigma = 0.4

    [base]                        # optional
    total_mass = 1.0
    window = [0.0, 1.0]

Errors are reported as SpecParseError with the line of the offending key.
"""

from __future__ import annotations

import re
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import BaseMeasure, CormSpec, DirectingMeasure, build_directing_measure, build_marginal
from .core import DIRECTING_FAMILIES, ScoreModel
from .errors import CormError, SpecParseError

_SCORE_PARAMS = {"gamma": {"shape", "rate"}, "beta": {"alpha", "beta"}, "exponential": {"rate"}}
_TOML_LINE = re.compile(r"\(at line (\d+), column \d+\)")


def _locate(text: str, section: str | None, key: str | None) -> int | None:
    """1-based line of `key` inside `[section]` (or of the header when key is None)."""
    current = None
    header_line = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[\[?\s*([^\]]+?)\s*\]\]?$", line)
        if m:
            current = m.group(1)
            if section is not None and current == section and header_line is None:
                header_line = n
            continue
        if key is None:
            continue
        in_section = current == section or (section is None and current is None)
        if in_section and re.match(rf"^{re.escape(key)}\s*=", line):
            return n
    return header_line


class _Ctx:
    def __init__(self, text: str):
        self.text = text

    def fail(self, message: str, section: str | None = None, key: str | None = None):
        raise SpecParseError(message, _locate(self.text, section, key))


def _number(ctx: _Ctx, table: dict, key: str, section: str, default=None):
    if key not in table:
        if default is None:
            ctx.fail(f"[{section}] missing required key {key!r}", section)
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.fail(f"[{section}] {key} must be a number, got {v!r}", section, key)
    return float(v)


def _marginal(ctx: _Ctx, table: dict, section: str):
    if not isinstance(table, dict):
        ctx.fail(f"[{section}] must be a table", section)
    family = table.get("family")
    if not isinstance(family, str):
        ctx.fail(f"[{section}] needs a string 'family'", section, "family" if "family" in table else None)
    family = family.lower()
    if family not in _SCORE_PARAMS:
        ctx.fail(f"[{section}] unsupported score family {family!r}; expected one of {sorted(_SCORE_PARAMS)}", section, "family")
    extra = set(table) - _SCORE_PARAMS[family] - {"family"}
    if extra:
        key = sorted(extra)[0]
        ctx.fail(f"[{section}] unexpected key {key!r} for {family}", section, key)
    params = {k: _number(ctx, table, k, section) for k in _SCORE_PARAMS[family] if k in table}
    try:
        return build_marginal(family, **params)
    except TypeError:
        missing = sorted(_SCORE_PARAMS[family] - set(params))
        ctx.fail(f"[{section}] missing parameter(s) {missing} for {family}", section)
    except (CormError, ValueError) as exc:
        key = next((k for k in params if k in str(exc)), "family")
        ctx.fail(f"[{section}] {exc}", section, key)


def _directing(ctx: _Ctx, table) -> DirectingMeasure:
    if not isinstance(table, dict):
        ctx.fail("missing [directing] table")
    family = table.get("family")
    if not isinstance(family, str) or family.lower() not in DIRECTING_FAMILIES:
        ctx.fail(f"[directing] family must be one of {list(DIRECTING_FAMILIES)}, got {family!r}", "directing", "family")
    extra = set(table) - {"family", "sigma"}
    if extra:
        key = sorted(extra)[0]
        ctx.fail(f"[directing] unexpected key {key!r}", "directing", key)
    params = {}
    if "sigma" in table:
        params["sigma"] = _number(ctx, table, "sigma", "directing")
    try:
        return build_directing_measure(family, **params)
    except (CormError, ValueError) as exc:
        ctx.fail(f"[directing] {exc}", "directing", "sigma" if "sigma" in table else "family")


def _base(ctx: _Ctx, table) -> BaseMeasure:
    if table is None:
        return BaseMeasure()
    if not isinstance(table, dict):
        ctx.fail("[base] must be a table", "base")
    extra = set(table) - {"total_mass", "window"}
    if extra:
        key = sorted(extra)[0]
        ctx.fail(f"[base] unexpected key {key!r}", "base", key)
    mass = _number(ctx, table, "total_mass", "base", 1.0)
    window = table.get("window", [0.0, 1.0])
    if not (isinstance(window, list) and len(window) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in window)):
        ctx.fail("[base] window must be a list of two numbers", "base", "window")
    try:
        return BaseMeasure(mass, (float(window[0]), float(window[1])))
    except (CormError, ValueError) as exc:
        ctx.fail(f"[base] {exc}", "base", "total_mass" if "total_mass" in str(exc) else "window")


def parse_spec(text: str) -> CormSpec:
    ctx = _Ctx(text)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _TOML_LINE.search(str(exc))
        raise SpecParseError(f"invalid TOML: {_TOML_LINE.sub('', str(exc)).strip()}", int(m.group(1)) if m else None) from None
    unknown = set(doc) - {"dimension", "score", "directing", "base"}
    if unknown:
        key = sorted(unknown)[0]
        ctx.fail(f"unknown top-level key {key!r}", None, key)
    dim = doc.get("dimension")
    if dim is not None and (isinstance(dim, bool) or not isinstance(dim, int) or dim < 1):
        ctx.fail(f"dimension must be a positive integer, got {dim!r}", None, "dimension")

    score = doc.get("score")
    if not isinstance(score, dict):
        ctx.fail("missing [score] table")
    if "marginals" in score:
        items = score["marginals"]
        if set(score) != {"marginals"}:
            ctx.fail("[score] mixes 'marginals' with iid keys", "score")
        if not isinstance(items, list) or not items:
            ctx.fail("[[score.marginals]] must list at least one table", "score.marginals")
        marginals = tuple(_marginal(ctx, t, "score.marginals") for t in items)
        if dim is not None and dim != len(marginals):
            ctx.fail(f"dimension = {dim} but {len(marginals)} marginals are listed", None, "dimension")
    else:
        m = _marginal(ctx, score, "score")
        marginals = (m,) * (dim or 1)

    directing = _directing(ctx, doc.get("directing"))
    base = _base(ctx, doc.get("base"))
    return CormSpec(ScoreModel(marginals), directing, base)


def load_spec(path) -> CormSpec:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise SpecParseError(f"cannot read {p}: {exc}") from None
    return parse_spec(text)
