"""File formats: CSV traces, JSON reports and state-space documents, INI scenarios.

Floats are written with 17 significant digits so that a write/read round
trip is exact and repeated runs are byte-identical.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, SchemaError
from .logderiv import FreqResponse, LogDerivTrace
from .models import GridParams, VscParams
from .statespace import StateSpace

FLOAT_FMT = "%.17g"
TWO_PI = 2.0 * np.pi


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT % x
    return str(x)


def write_csv(path, header, rows):
    """Write rows with fixed float formatting and ``\\n`` line endings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    Path(path).write_text(buf.getvalue())


def locus_rows(locus):
    f = locus.omega / TWO_PI
    return ((fi, v.real, v.imag, locus.name, locus.domain) for fi, v in zip(f, locus.values))


def write_loci(path, loci):
    """Loci as CSV with columns ``freq_hz, re, im, channel, domain``."""
    rows = [r for loc in loci for r in locus_rows(loc)]
    write_csv(path, ("freq_hz", "re", "im", "channel", "domain"), rows)


def write_trace(path, trace: LogDerivTrace):
    """Log-derivative trace with columns ``freq_hz, re_dl, im_dl, mask``."""
    f = trace.omega / TWO_PI
    rows = zip(f, trace.dl.real, trace.dl.imag, trace.mask.astype(bool))
    write_csv(path, ("freq_hz", "re_dl", "im_dl", "mask"), rows)


def write_response(path, resp: FreqResponse):
    """Frequency response with columns ``freq_hz, re, im, channel``."""
    f = resp.omega / TWO_PI
    rows = ((fi, v.real, v.imag, resp.name) for fi, v in zip(f, resp.values))
    write_csv(path, ("freq_hz", "re", "im", "channel"), rows)


def read_responses(path, domain="dq", kind="loop") -> dict:
    """Read ``freq_hz, re, im[, channel]`` rows into one response per channel."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    cols = reader.fieldnames or []
    for c in ("freq_hz", "re", "im"):
        if c not in cols:
            raise SchemaError(f"missing column '{c}' in {path}")
    data = {}
    for lineno, row in enumerate(reader, start=2):
        name = row.get("channel") or path.stem
        try:
            vals = tuple(float(row[c]) for c in ("freq_hz", "re", "im"))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"line {lineno}: non-numeric value") from exc
        data.setdefault(name, []).append(vals)
    if not data:
        raise SchemaError(f"no data rows in {path}")
    out = {}
    for name, rows in data.items():
        a = np.array(rows)
        if np.any(np.diff(a[:, 0]) <= 0):
            raise SchemaError(f"channel '{name}': frequency is not strictly increasing")
        out[name] = FreqResponse(TWO_PI * a[:, 0], a[:, 1] + 1j * a[:, 2], name, domain, kind)
    return out


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# state-space documents
# ---------------------------------------------------------------------------

def statespace_to_dict(ss: StateSpace) -> dict:
    d = {"n": ss.n, "m": ss.m, "p": ss.p,
         "A": ss.A.ravel().tolist(), "B": ss.B.ravel().tolist(),
         "C": ss.C.ravel().tolist(), "D": ss.D.ravel().tolist(),
         "input_labels": list(ss.input_labels), "output_labels": list(ss.output_labels)}
    if ss.E is not None:
        d["E"] = ss.E.ravel().tolist()
    return d


def statespace_from_dict(d: dict) -> StateSpace:
    try:
        n, m, p = int(d["n"]), int(d["m"]), int(d["p"])
        mat = lambda k, r, c: np.asarray(d[k], dtype=np.float64).reshape(r, c)
        E = mat("E", p, m) if "E" in d else None
        return StateSpace(mat("A", n, n), mat("B", n, m), mat("C", p, n), mat("D", p, m), E,
                          tuple(d.get("input_labels", ())), tuple(d.get("output_labels", ())))
    except KeyError as exc:
        raise SchemaError(f"state-space document lacks field {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise SchemaError(f"state-space document has inconsistent sizes: {exc}") from exc


# ---------------------------------------------------------------------------
# scenario configuration
# ---------------------------------------------------------------------------

CRITERIA = ("determinant", "eigenvalue", "schur-loop", "logderiv")
DOMAINS = ("dq", "sequence")


@dataclass(frozen=True)
class SweepSpec:
    section: str       # "vsc" or "grid"
    name: str
    start: float
    stop: float
    steps: int

    def values(self):
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class AnalysisSpec:
    criteria: tuple = CRITERIA
    domains: tuple = ("dq",)
    f_min_hz: float = -100.0
    f_max_hz: float = 100.0
    step_hz: float = 0.5
    logderiv_step_hz: float = 0.01
    frame: int = 1
    carriers_hz: tuple = ()


@dataclass(frozen=True)
class Scenario:
    vsc: VscParams = field(default_factory=VscParams)
    grid: GridParams = field(default_factory=GridParams)
    sweep: SweepSpec | None = None
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    path: str | None = None


def _convert(section, key, raw, typ):
    try:
        if typ is bool:
            return {"1": True, "true": True, "yes": True, "on": True,
                    "0": False, "false": False, "no": False, "off": False}[raw.strip().lower()]
        if typ is int:
            return int(raw)
        return float(raw)
    except (KeyError, ValueError):
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _section_to(cls, cp, section):
    if not cp.has_section(section):
        return cls()
    known = {f.name: f for f in fields(cls)}
    kw = {}
    for key, raw in cp.items(section):
        if key not in known:
            raise ConfigError(f"[{section}] unknown key '{key}'")
        ftype = type(getattr(cls(), key))
        kw[key] = _convert(section, key, raw, ftype)
    try:
        return cls(**kw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _split_list(section, key, raw, allowed):
    items = tuple(x.strip() for x in raw.split(",") if x.strip())
    if not items:
        raise ConfigError(f"[{section}] {key}: empty list")
    for x in items:
        if x not in allowed:
            raise ConfigError(f"[{section}] {key}: unknown value '{x}' (allowed: {', '.join(allowed)})")
    return items


def parse_analysis(cp) -> AnalysisSpec:
    sec = "analysis"
    if not cp.has_section(sec):
        return AnalysisSpec()
    kw = {}
    for key, raw in cp.items(sec):
        if key == "criteria":
            kw[key] = _split_list(sec, key, raw, CRITERIA)
        elif key == "domains":
            kw[key] = _split_list(sec, key, raw, DOMAINS)
        elif key in ("f_min_hz", "f_max_hz", "step_hz", "logderiv_step_hz"):
            kw[key] = _convert(sec, key, raw, float)
        elif key == "frame":
            kw[key] = _convert(sec, key, raw, int)
            if kw[key] not in (1, 2):
                raise ConfigError(f"[{sec}] frame: must be 1 or 2")
        elif key == "carriers_hz":
            kw[key] = tuple(_convert(sec, key, x, float) for x in raw.split(",") if x.strip())
        else:
            raise ConfigError(f"[{sec}] unknown key '{key}'")
    spec = AnalysisSpec(**kw)
    return validate_analysis(spec)


def validate_analysis(spec: AnalysisSpec) -> AnalysisSpec:
    if not spec.f_min_hz < spec.f_max_hz:
        raise ConfigError("[analysis] f_min_hz: must be below f_max_hz")
    for key in ("step_hz", "logderiv_step_hz"):
        if not getattr(spec, key) > 0:
            raise ConfigError(f"[analysis] {key}: must be positive")
    if not spec.criteria:
        raise ConfigError("[analysis] criteria: at least one criterion is required")
    if not spec.domains:
        raise ConfigError("[analysis] domains: at least one domain is required")
    return spec


def parse_sweep(cp) -> SweepSpec | None:
    sec = "sweep"
    if not cp.has_section(sec):
        return None
    for key in cp.options(sec):
        if key not in ("parameter", "from", "to", "steps"):
            raise ConfigError(f"[{sec}] unknown key '{key}'")
    for key in ("parameter", "from", "to", "steps"):
        if not cp.has_option(sec, key):
            raise ConfigError(f"[{sec}] missing key '{key}'")
    param = cp.get(sec, "parameter").strip()
    section, _, name = param.rpartition(".")
    if not section:
        section = "grid" if name in {f.name for f in fields(GridParams)} else "vsc"
    cls = {"grid": GridParams, "vsc": VscParams}.get(section)
    if cls is None or name not in {f.name for f in fields(cls)}:
        raise ConfigError(f"[{sec}] parameter: unknown parameter '{param}'")
    steps = _convert(sec, "steps", cp.get(sec, "steps"), int)
    if steps < 1:
        raise ConfigError(f"[{sec}] steps: must be at least 1")
    return SweepSpec(section, name, _convert(sec, "from", cp.get(sec, "from"), float),
                     _convert(sec, "to", cp.get(sec, "to"), float), steps)


def parse_scenario_text(text: str, path: str | None = None) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str   # parameter names are case-sensitive (L_f, P0, ...)
    try:
        cp.read_string(text, source=path or "<scenario>")
    except configparser.Error as exc:
        raise ConfigError(f"malformed scenario: {exc}") from None
    for sec in cp.sections():
        if sec not in ("vsc", "grid", "sweep", "analysis"):
            raise ConfigError(f"unknown section [{sec}]")
    return Scenario(_section_to(VscParams, cp, "vsc"), _section_to(GridParams, cp, "grid"),
                    parse_sweep(cp), parse_analysis(cp), path)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario_text(text, str(path))


def scenario_at(sc: Scenario, value: float) -> Scenario:
    """Scenario with the swept parameter set to ``value``."""
    from dataclasses import replace
    sw = sc.sweep
    if sw.section == "grid":
        return replace(sc, grid=replace(sc.grid, **{sw.name: float(value)}))
    return replace(sc, vsc=replace(sc.vsc, **{sw.name: float(value)}))
