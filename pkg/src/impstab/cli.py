"""Command-line interface: ``analyze``, ``compare-oracle``, ``import-response``, ``sweep``.

Exit codes of ``analyze``, ``sweep`` and ``import-response``: 0 when every
verdict is Stable, 2 when any verdict is Unstable, 3 when none is Unstable
but some is Indeterminate, 1 on a configuration or input error.
``compare-oracle`` exits 0 when every criterion agrees with the closed-loop
eigenvalues (eigenvalue-criterion Indeterminates are tolerated), 4 on a
disagreement and 1 on error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io as iox
from .criteria import (StabilityReport, Verdict, determinant_criterion, eigen_loci,
                       oracle_verdict, schur_loop_criterion, Locus)
from .errors import ConfigError, ImpstabError
from .frames import rotate_to_sequence
from .logderiv import FreqResponse, LogDerivTrace, stability_from_loops
from .models import build_rl_grid, build_vsc, rl_grid_impedance_ss
from .schur import schur_complement_values
from .statespace import close_loop, eigenvalues, transfer_matrix

EXIT_STABLE = 0
EXIT_ERROR = 1
EXIT_UNSTABLE = 2
EXIT_INDETERMINATE = 3
EXIT_MISMATCH = 4

TWO_PI = 2.0 * np.pi
FRAME_NAMES = {"dq": ("d", "q"), "sequence": ("p", "n")}


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """A scenario with command-line overrides applied, plus the output directory."""

    scenario: iox.Scenario
    out_dir: Path | None = None

    @property
    def analysis(self) -> iox.AnalysisSpec:
        return self.scenario.analysis


def _flag_list(flag, raw, allowed):
    items = tuple(x.strip() for x in raw.split(",") if x.strip())
    if not items:
        raise ConfigError(f"{flag}: empty list")
    for x in items:
        if x not in allowed:
            raise ConfigError(f"{flag}: unknown value '{x}' (allowed: {', '.join(allowed)})")
    return items


def make_run_config(config_path, out=None, criteria=None, domains=None, step_hz=None) -> RunConfig:
    sc = iox.load_scenario(config_path)
    spec = sc.analysis
    if criteria is not None:
        spec = replace(spec, criteria=_flag_list("--criteria", criteria, iox.CRITERIA))
    if domains is not None:
        spec = replace(spec, domains=_flag_list("--domains", domains, iox.DOMAINS))
    if step_hz is not None:
        spec = replace(spec, step_hz=float(step_hz))
    spec = iox.validate_analysis(spec)
    if sc.grid.omega0 != sc.vsc.omega0:
        raise ConfigError("[grid] omega0: must equal [vsc] omega0")
    return RunConfig(replace(sc, analysis=spec), Path(out) if out else None)


# ---------------------------------------------------------------------------
# one operating point
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PointModels:
    """Converter and grid models of one scenario, with the closed-loop oracle."""

    vsc_ss: object
    grid_ss: object
    yc: object
    zc: object
    zg: object
    eigs: np.ndarray
    omega0: float

    @property
    def max_real(self) -> float:
        return float(self.eigs.real.max())

    @property
    def oracle(self) -> Verdict:
        return oracle_verdict(self.eigs)


def build_point(sc: iox.Scenario) -> PointModels:
    ss = build_vsc(sc.vsc)
    g_ss = rl_grid_impedance_ss(sc.grid)
    yc = transfer_matrix(ss)
    eigs = eigenvalues(close_loop(g_ss, ss).A)
    return PointModels(ss, g_ss, yc, yc.inv(), build_rl_grid(sc.grid), eigs, sc.vsc.omega0)


def loop_channels(pt: PointModels, spec: iox.AnalysisSpec, domain: str) -> list:
    """Sampled loop impedances of both frames of ``Z_g + Z_c`` in one domain.

    The grid runs from ``f_min_hz`` to ``f_max_hz`` about the domain centre
    (0 in dq, the fundamental in the sequence domain).
    """
    h = spec.logderiv_step_hz
    center = pt.omega0 / TWO_PI if domain == "sequence" else 0.0
    k = np.arange(int(np.round(spec.f_min_hz / h)), int(np.round(spec.f_max_hz / h)) + 1)
    w = TWO_PI * (center + k * h)
    s = 1j * (w - (pt.omega0 if domain == "sequence" else 0.0))
    H = pt.zg(s) + pt.zc(s)
    if domain == "sequence":
        H = rotate_to_sequence(H)
    return [FreqResponse(w, schur_complement_values(H, fr), "loop_" + FRAME_NAMES[domain][fr - 1], domain)
            for fr in (1, 2)]


def _carriers(spec, domain, omega0):
    center = omega0 / TWO_PI if domain == "sequence" else 0.0
    return tuple(TWO_PI * (center + c) for c in spec.carriers_hz)


def analyze_point(pt: PointModels, spec: iox.AnalysisSpec) -> tuple:
    """All selected (criterion, domain) reports at one point, and the skipped pairs."""
    band = max(abs(spec.f_min_hz), abs(spec.f_max_hz))
    reports, skipped = [], []
    for dom in spec.domains:
        det_count = None
        if "determinant" in spec.criteria:
            rep = determinant_criterion(pt.zg, pt.yc, domain=dom, omega0=pt.omega0,
                                        step_hz=spec.step_hz, band_hz=band)
            det_count = rep.encirclements
            reports.append(rep)
        if "eigenvalue" in spec.criteria:
            *_, rep = eigen_loci(pt.zg, pt.yc, domain=dom, omega0=pt.omega0,
                                 step_hz=spec.step_hz, band_hz=band, det_count=det_count)
            reports.append(rep)
        if "schur-loop" in spec.criteria:
            if dom == "dq":
                reports.append(schur_loop_criterion(pt.zg, pt.zc, frame=spec.frame,
                                                    step_hz=spec.step_hz, band_hz=band))
            else:
                skipped.append({"criterion": "schur-loop", "domain": dom,
                                "reason": "loop census is computed on real-coefficient dq functions only"})
        if "logderiv" in spec.criteria:
            rep = stability_from_loops(loop_channels(pt, spec, dom), pt.omega0,
                                       {dom: _carriers(spec, dom, pt.omega0)})
            rep.domain = dom
            reports.append(rep)
    if "logderiv" in spec.criteria and len(spec.domains) > 1:
        chans = [c for dom in spec.domains for c in loop_channels(pt, spec, dom)]
        both = stability_from_loops(chans, pt.omega0,
                                    {d: _carriers(spec, d, pt.omega0) for d in spec.domains})
        for rep in reports:
            if rep.criterion == "logderiv":
                rep.evidence["cross_domain"] = {"verdict": both.verdict.value, "reason": both.reason}
                if both.verdict is Verdict.INDETERMINATE and rep.verdict is not Verdict.INDETERMINATE:
                    rep.caveats.append("domains disagree on the unstable modes")
    return reports, skipped


def exit_code(reports) -> int:
    verdicts = {r.verdict for r in reports}
    if Verdict.UNSTABLE in verdicts:
        return EXIT_UNSTABLE
    if Verdict.INDETERMINATE in verdicts:
        return EXIT_INDETERMINATE
    return EXIT_STABLE


def oracle_dict(pt: PointModels) -> dict:
    rhp = pt.eigs[pt.eigs.real > 0]
    rhp = rhp[np.lexsort((rhp.imag, -rhp.real))]
    return {"verdict": pt.oracle.value, "max_real": pt.max_real,
            "rhp_eigenvalues": [[float(z.real), float(z.imag)] for z in rhp]}


def _scenario_dict(sc: iox.Scenario) -> dict:
    vsc = asdict(sc.vsc)
    return {"path": sc.path, "vsc": vsc, "grid": asdict(sc.grid)}


def _summary_line(rep: StabilityReport) -> str:
    parts = [f"{rep.criterion:<12}", f"{rep.domain:<9}", f"{rep.verdict.value:<13}"]
    if rep.encirclements is not None:
        parts.append(f"N_ccw={rep.encirclements}")
    if rep.per_locus:
        parts.append(f"per_locus={rep.per_locus}")
    if rep.rhp_closed_loop_zeros is not None:
        parts.append(f"Z={rep.rhp_closed_loop_zeros}")
    for m in rep.modes:
        parts.append(f"mode({m['freq_hz']:.3f} Hz, alpha={m['alpha_z']:.4g})")
    if rep.reason:
        parts.append(f"[{rep.reason}]")
    return " ".join(parts)


def _write_outputs(out: Path, reports, document):
    out.mkdir(parents=True, exist_ok=True)
    loci = [l for r in reports for l in r.loci if isinstance(l, Locus)]
    iox.write_loci(out / "loci.csv", loci)
    for r in reports:
        for t in r.loci:
            if isinstance(t, LogDerivTrace):
                iox.write_trace(out / f"trace_{t.domain}_{t.name}.csv", t)
    iox.write_json(out / "report.json", document)


def run_analyze(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    pt = build_point(cfg.scenario)
    reports, skipped = analyze_point(pt, cfg.analysis)
    code = exit_code(reports)
    doc = {"scenario": _scenario_dict(cfg.scenario), "analysis": asdict(cfg.analysis),
           "oracle": oracle_dict(pt), "reports": [r.to_dict() for r in reports],
           "skipped": skipped, "exit_code": code}
    if cfg.out_dir is not None:
        _write_outputs(cfg.out_dir, reports, doc)
    for r in reports:
        print(_summary_line(r), file=stream)
    print(f"{'oracle':<12} {'':<9} {pt.oracle.value:<13} max_real={pt.max_real:.6g}", file=stream)
    return code


# ---------------------------------------------------------------------------
# oracle comparison and sweeps
# ---------------------------------------------------------------------------

def _sweep_points(sc: iox.Scenario):
    if sc.sweep is None:
        return [(None, sc)]
    return [(float(v), iox.scenario_at(sc, v)) for v in sc.sweep.values()]


def alpha_error(pt: PointModels, reports) -> float | None:
    """Largest relative error of the logderiv damping over the oracle's unstable modes.

    ``None`` when the oracle is stable, no logderiv report ran, or a mode
    was not matched within 1 Hz.
    """
    rhp = pt.eigs[pt.eigs.real > 0]
    ld = [r for r in reports if r.criterion == "logderiv"]
    if rhp.size == 0 or not ld:
        return None
    worst = 0.0
    for r in ld:
        shift = pt.omega0 if r.domain == "sequence" else 0.0
        for lam in rhp:
            cands = [m["alpha_z"] for m in r.modes
                     if abs(m["omega_z"] - shift - lam.imag) <= TWO_PI * 1.0]
            if not cands:
                return None
            worst = max(worst, min(abs(a - lam.real) / lam.real for a in cands))
    return worst


@dataclass
class Comparison:
    """One row per sweep point; ``ok`` is False on any disagreement with the oracle."""

    parameter: str | None
    columns: list
    rows: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)
    tolerated: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_dict(self):
        return {"parameter": self.parameter, "columns": self.columns, "rows": self.rows,
                "mismatches": self.mismatches, "tolerated": self.tolerated, "ok": self.ok}


def compare_oracle(cfg: RunConfig) -> Comparison:
    sc = cfg.scenario
    param = f"{sc.sweep.section}.{sc.sweep.name}" if sc.sweep else None
    cmp = Comparison(param, [])
    for value, sc_i in _sweep_points(sc):
        pt = build_point(sc_i)
        reports, _ = analyze_point(pt, cfg.analysis)
        oracle = pt.oracle
        row = {"value": value, "oracle": oracle.value, "max_real": pt.max_real,
               "alpha_error": alpha_error(pt, reports)}
        for r in reports:
            key = f"{r.criterion}/{r.domain}"
            if key not in cmp.columns:
                cmp.columns.append(key)
            row[key] = r.verdict.value
            if r.verdict is oracle:
                continue
            entry = {"value": value, "column": key, "verdict": r.verdict.value,
                     "oracle": oracle.value, "reason": r.reason}
            if r.criterion == "eigenvalue" and r.verdict is Verdict.INDETERMINATE:
                cmp.tolerated.append(entry)
            else:
                cmp.mismatches.append(entry)
        cmp.rows.append(row)
    return cmp


def _format_table(cmp: Comparison) -> str:
    head = [cmp.parameter or "point", "oracle", "max_real"] + cmp.columns + ["alpha_err"]
    lines = []
    for i, row in enumerate(cmp.rows):
        v = row["value"]
        ae = row["alpha_error"]
        cells = [f"{v:.6g}" if v is not None else str(i), row["oracle"], f"{row['max_real']:.4g}"]
        cells += [row.get(c, "-") for c in cmp.columns]
        cells.append("-" if ae is None else f"{ae:.2%}")
        lines.append(cells)
    widths = [max(len(str(x)) for x in col) for col in zip(head, *lines)]
    fmt = lambda cells: "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    return "\n".join([fmt(head)] + [fmt(c) for c in lines])


def run_compare_oracle(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    cmp = compare_oracle(cfg)
    print(_format_table(cmp), file=stream)
    for t in cmp.tolerated:
        print(f"tolerated: {t['column']} Indeterminate at {t['value']} "
              f"(oracle {t['oracle']}; {t['reason']})", file=stream)
    for m in cmp.mismatches:
        print(f"MISMATCH: {m['column']} says {m['verdict']} at {m['value']} "
              f"but the oracle says {m['oracle']}", file=stream)
    if cfg.out_dir is not None:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        iox.write_json(cfg.out_dir / "compare.json", cmp.to_dict())
        header = ["value", "oracle", "max_real"] + cmp.columns + ["alpha_error"]
        iox.write_csv(cfg.out_dir / "compare.csv", header,
                      [[r.get(c, "") if r.get(c) is not None else "" for c in header] for r in cmp.rows])
    return EXIT_STABLE if cmp.ok else EXIT_MISMATCH


def run_sweep(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    sc = cfg.scenario
    if sc.sweep is None:
        raise ConfigError("[sweep] section is required for the sweep command")
    columns, rows, worst = [], [], []
    for i, (value, sc_i) in enumerate(_sweep_points(sc)):
        pt = build_point(sc_i)
        reports, skipped = analyze_point(pt, cfg.analysis)
        worst.extend(reports)
        row = {"value": value, "oracle": pt.oracle.value, "max_real": pt.max_real}
        for r in reports:
            key = f"{r.criterion}/{r.domain}"
            if key not in columns:
                columns.append(key)
            row[key] = r.verdict.value
        rows.append(row)
        if cfg.out_dir is not None:
            doc = {"scenario": _scenario_dict(sc_i), "analysis": asdict(cfg.analysis),
                   "oracle": oracle_dict(pt), "reports": [r.to_dict() for r in reports],
                   "skipped": skipped, "exit_code": exit_code(reports)}
            _write_outputs(cfg.out_dir / f"point_{i:03d}", reports, doc)
    header = ["value", "oracle", "max_real"] + columns
    print("  ".join(header), file=stream)
    for r in rows:
        print("  ".join(f"{r[c]:.6g}" if isinstance(r.get(c), float) else str(r.get(c, "-"))
                        for c in header), file=stream)
    if cfg.out_dir is not None:
        iox.write_csv(cfg.out_dir / "sweep.csv", header, [[r.get(c, "") for c in header] for r in rows])
    return exit_code(worst)


def run_import_response(csv_path, domain="dq", step_hz=None, kind="loop", carriers_hz=(),
                        out=None, omega0=100 * np.pi, stream=None) -> int:
    stream = stream or sys.stdout
    """Log-derivative verdict on measured loop responses.

    Channels are resampled by linear interpolation of the real and
    imaginary parts when ``step_hz`` is given or the file is not uniform.
    """
    if domain not in iox.DOMAINS:
        raise ConfigError(f"--domain: unknown value '{domain}' (allowed: {', '.join(iox.DOMAINS)})")
    chans = import_response(csv_path, domain, step_hz, kind)
    center = omega0 / TWO_PI if domain == "sequence" else 0.0
    carriers = tuple(TWO_PI * (center + c) for c in carriers_hz)
    rep = stability_from_loops(list(chans.values()), omega0, {domain: carriers})
    rep.domain = domain
    code = exit_code([rep])
    if out is not None:
        doc = {"input": str(csv_path), "domain": domain, "channels": sorted(chans),
               "reports": [rep.to_dict()], "exit_code": code}
        _write_outputs(Path(out), [rep], doc)
    print(_summary_line(rep), file=stream)
    return code


def import_response(csv_path, domain="dq", step_hz=None, kind="loop") -> dict:
    """Read a response CSV into uniformly sampled channels usable by logderiv."""
    chans = iox.read_responses(csv_path, domain, kind)
    out = {}
    for name, resp in chans.items():
        if step_hz:
            resp = resp.resampled(TWO_PI * step_hz)
        elif resp.uniform_step() is None:
            resp = resp.resampled(float(np.min(np.diff(resp.omega))))
        out[name] = resp
    return out


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="impstab", description="Impedance-based stability analysis")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="scenario file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--criteria", help="comma-separated: " + ",".join(iox.CRITERIA))
        p.add_argument("--domains", help="comma-separated: " + ",".join(iox.DOMAINS))
        p.add_argument("--step-hz", type=float, help="base frequency step of the encirclement grids")

    common(sub.add_parser("analyze", help="all selected criteria at the scenario point"))
    common(sub.add_parser("compare-oracle", help="criteria against closed-loop eigenvalues"))
    common(sub.add_parser("sweep", help="analyze every point of the [sweep] section"))
    p = sub.add_parser("import-response", help="log-derivative verdict from a response CSV")
    p.add_argument("--csv", required=True, help="columns freq_hz, re, im[, channel]")
    p.add_argument("--domain", default="dq", help="dq or sequence")
    p.add_argument("--step-hz", type=float, help="resampling step in Hz")
    p.add_argument("--kind", default="loop", choices=("loop", "eigenvalue"))
    p.add_argument("--carriers-hz", default="", help="comma-separated frequencies to mask")
    p.add_argument("--out", help="output directory")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "import-response":
            carriers = tuple(float(x) for x in args.carriers_hz.split(",") if x.strip())
            return run_import_response(args.csv, args.domain, args.step_hz, args.kind,
                                       carriers, args.out)
        if args.step_hz is not None and not args.step_hz > 0:
            raise ConfigError("--step-hz: must be positive")
        cfg = make_run_config(args.config, args.out, args.criteria, args.domains, args.step_hz)
        run = {"analyze": run_analyze, "compare-oracle": run_compare_oracle,
               "sweep": run_sweep}[args.command]
        return run(cfg)
    except (ImpstabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
