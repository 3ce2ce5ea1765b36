"""Command-line front end: ``snstf analyze|simulate|sweep|scan|bounds``.

Exit codes: 0 success, 1 unexpected workbench error, 2 usage, 3 ledger
schema or missing row, 4 domain error (including missing phase
estimates), 5 quadrature failure, 6 invalid configuration, 7 file I/O.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import plob_bound, tgw_bound
from .config import RunConfig, load_config
from .decoy import IntensityProbabilityConfig, key_rate
from .errors import ConfigError, DomainError, LedgerSchemaError, SnstfError
from .ledger import (GOLDEN_LABELS, ledger_from_dict, load_golden_document, save_ledger)
from .phase import PhaseEstimate, ReferenceWindowCounts
from .sifting import read_events, scan_golden_table, scan_postselection, write_events
from .simulator import distance_sweep, expected_ledger, monte_carlo_run

EXIT_IO = 7

SWEEP_COLUMNS = ("distance_km", "R", "s1", "e1ph", "plob", "tgw")
SCAN_COLUMNS = ("rc", "ds_deg", "qber_x11", "detections_x11", "R")
ANALYZE_COLUMNS = ("label", "R", "s1", "e1ph", "S_Z", "E_Z", "reported_R")
REFERENCE_COLUMNS = ("window", "n1_0", "n1_90", "n1_180", "n1_270", "n2_0", "n2_90", "n2_180", "n2_270",
                     "delta_phi_T", "rc")


# -- formatting ---------------------------------------------------------------------

def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return repr(float(v))


def write_csv(rows, columns, stream) -> None:
    """Fixed column order, '.' decimals and shortest round-trip floats."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    return obj


def parse_list(text: str) -> list:
    """``"a,b,c"`` or ``"start:stop:count"`` (inclusive linear grid)."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            n = int(count)
            if n < 1:
                raise ValueError
            return [float(v) for v in np.linspace(float(start), float(stop), n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p.open("w", newline=""), True


# -- commands -----------------------------------------------------------------------

def _config(args) -> RunConfig:
    return load_config(args.config) if getattr(args, "config", None) else RunConfig()


def _read_doc(path) -> dict:
    text = Path(path).read_text()
    if not text.strip():
        return {}
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise LedgerSchemaError(f"{path}: not valid JSON ({exc.msg})") from None


def _analyze_one(ledger, rc: RunConfig):
    cfg_a = rc.source_a or IntensityProbabilityConfig.from_parameters(ledger.parameters)
    ds = rc.slice.Ds if rc.slice is not None else None
    return key_rate(ledger, cfg_a, rc.budget, n_total=ledger.n_total or rc.n_total, slice_halfwidth=ds,
                    cfg_b=rc.source_b)


def cmd_analyze(args) -> int:
    rc = _config(args)
    docs = []
    for label in (GOLDEN_LABELS if args.all_golden else args.golden or []):
        docs.append(load_golden_document(label))
    for path in args.ledger or []:
        docs.append(_read_doc(path))
    if not docs and rc.paths.get("ledger"):
        docs.append(_read_doc(rc.paths["ledger"]))
    if not docs:
        raise ConfigError(["analyze: give --ledger, --golden or --all-golden"])
    rows, reports = [], []
    for doc in docs:
        ledger = ledger_from_dict(doc)
        rep = _analyze_one(ledger, rc)
        reports.append(rep)
        print(rep.summary())
        print()
        rows.append({"label": ledger.label, "R": rep.R, "s1": rep.s1_lower, "e1ph": rep.e1ph_upper,
                     "S_Z": rep.S_Z, "E_Z": rep.E_Z, "reported_R": ledger.reported.get("R")})
    if args.csv:
        out, close = _open_out(args.csv)
        write_csv(rows, ANALYZE_COLUMNS, out)
        if close:
            out.close()
    if args.json:
        Path(args.json).parent.mkdir(parents=True, exist_ok=True)
        Path(args.json).write_text(json.dumps(_jsonable([r.to_dict() for r in reports]), indent=2) + "\n")
    return 0


def _write_references(refs, estimates, stream):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(REFERENCE_COLUMNS)
    for ref, est in zip(refs, estimates):
        port2 = ref.counts_port2 or (0, 0, 0, 0)
        w.writerow([ref.window_index, *(_cell(c) for c in ref.counts), *(_cell(c) for c in port2),
                    _cell(est.delta_phi_T), _cell(est.rc)])


def read_references(stream):
    """Reference windows and phase estimates written by ``simulate``."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(header) != REFERENCE_COLUMNS:
        raise LedgerSchemaError(f"reference header must be {','.join(REFERENCE_COLUMNS)}")
    refs, ests = [], []
    for lineno, row in enumerate(reader, start=2):
        try:
            w = int(row[0])
            vals = [float(v) for v in row[1:]]
        except (ValueError, IndexError):
            raise LedgerSchemaError(f"references line {lineno}: malformed row") from None
        if len(vals) != 10:
            raise LedgerSchemaError(f"references line {lineno}: expected {len(REFERENCE_COLUMNS)} fields")
        refs.append(ReferenceWindowCounts(tuple(vals[:4]), window_index=w, counts_port2=tuple(vals[4:8])))
        ests.append(PhaseEstimate(vals[8], vals[9], 0.0, window_index=w))
    return refs, ests


def cmd_simulate(args) -> int:
    rc = load_config(args.config)
    if rc.channel is None or rc.source_a is None or rc.slice is None:
        raise ConfigError(["simulate needs [source], [channel] with eta_A/eta_B, and [slice]"])
    frames = args.frames or rc.frames
    if not frames:
        raise ConfigError(["simulate: give --frames or set frames in the config"])
    seed = rc.seed if args.seed is None else args.seed
    cfg_b = rc.source_b or rc.source_a
    res = monte_carlo_run(rc.source_a, cfg_b, rc.channel, rc.schedule, frames, seed, ideal_phase=rc.ideal_phase)
    out = Path(args.out or rc.paths.get("output", "sim_out"))
    out.mkdir(parents=True, exist_ok=True)
    with (out / "events.csv").open("w", newline="") as fh:
        write_events(res.events, fh)
    with (out / "references.csv").open("w", newline="") as fh:
        _write_references(res.references, res.estimates, fh)
    ledger = res.ledger(rc.slice, label=f"simulated seed={seed} frames={frames}")
    ledger.parameters.update({"mu1": rc.source_a.mu1, "mu2": rc.source_a.mu2, "muz": rc.source_a.muz,
                              "p_X": rc.source_a.pX, "p_0": rc.source_a.p0, "p_1": rc.source_a.p1,
                              "p_2": rc.source_a.p2, "p_z1": rc.source_a.pz_send})
    save_ledger(ledger, out / "ledger.json")
    lines = [f"events         {len(res.events)}", f"pulses         {res.n_pulses}"]
    try:
        rep = key_rate(ledger, rc.source_a, rc.budget, n_total=res.n_pulses, slice_halfwidth=rc.slice.Ds,
                       cfg_b=rc.source_b)
        lines.append(rep.summary())
        (out / "report.json").write_text(json.dumps(_jsonable(rep.to_dict()), indent=2) + "\n")
    except DomainError as exc:
        lines.append(f"analysis       not possible: {exc}")
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_sweep(args) -> int:
    rc = _config(args)
    lo, hi, step = rc.sweep_range or (None, None, None)
    lo = args.from_km if args.from_km is not None else lo
    hi = args.to_km if args.to_km is not None else hi
    step = args.step_km if args.step_km is not None else step
    if lo is None or hi is None or step is None:
        raise ConfigError(["sweep: give --from, --to and --step (or [sweep] from_km/to_km/step_km)"])
    if step <= 0 or hi < lo:
        raise ConfigError([f"sweep: need step > 0 and to >= from, got {lo}..{hi} step {step}"])
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    distances = [lo + i * step for i in range(n)]
    rows = distance_sweep(rc.sweep_config(), rc.attenuation_db_per_km, distances)
    out, close = _open_out(args.out)
    write_csv(rows, SWEEP_COLUMNS, out)
    if close:
        out.close()
    return 0


def cmd_scan(args) -> int:
    rc = _config(args)
    if args.run:
        run = Path(args.run)
        with (run / "events.csv").open(newline="") as fh:
            events = read_events(fh)
        with (run / "references.csv").open(newline="") as fh:
            _, estimates = read_references(fh)
        ledger = ledger_from_dict(_read_doc(run / "ledger.json"))
        cfg_a = rc.source_a or IntensityProbabilityConfig.from_parameters(ledger.parameters)
        r_gate = rc.slice.r_gate if rc.slice else ledger.parameters.get("r_gate", 1.0)
        cells, best = scan_postselection(events, ledger.sent, {e.window_index: e for e in estimates},
                                         args.ds_grid, args.rc_grid, cfg_a, rc.budget, ledger.n_total,
                                         r_gate=r_gate, cfg_b=rc.source_b)
    elif args.ledger:
        doc = _read_doc(args.ledger)
        base = ledger_from_dict(doc)
        table = doc.get("slice_scan")
        if not table:
            raise LedgerSchemaError(f"{args.ledger}: no slice_scan block; use --run for event data")
        table = _subset(table, args.ds_grid, args.rc_grid)
        cells, best = scan_golden_table(base, table, rc.budget, cfg_a=rc.source_a)
    else:
        raise ConfigError(["scan: give --ledger or --run"])
    rows = [{"rc": c.rc, "ds_deg": c.ds_deg, "qber_x11": c.qber_x11, "detections_x11": c.detections_x11, "R": c.R}
            for c in cells]
    out, close = _open_out(args.out)
    write_csv(rows, SCAN_COLUMNS, out)
    if close:
        out.close()
    print(f"best: Ds={best.ds_deg:g} deg, rc={best.rc:g}, R={best.R:.4e}", file=sys.stderr)
    return 0


def _subset(table, ds_grid, rc_grid):
    def pick(values, wanted, name):
        if not wanted:
            return list(range(len(values)))
        idx = []
        for w in wanted:
            hits = [i for i, v in enumerate(values) if math.isclose(v, w, rel_tol=1e-9, abs_tol=1e-12)]
            if not hits:
                raise DomainError(f"{name} {w:g} is not in the ledger's scan table ({', '.join(f'{v:g}' for v in values)})")
            idx.append(hits[0])
        return idx

    di = pick(table["ds_deg"], ds_grid, "Ds")
    ri = pick(table["rc"], rc_grid, "rc")
    out = {"ds_deg": [table["ds_deg"][j] for j in di], "rc": [table["rc"][i] for i in ri]}
    for key in ("qber_x11", "detected_x11"):
        out[key] = [[table[key][i][j] for j in di] for i in ri]
    return out


def cmd_bounds(args) -> int:
    rows = [{"eta": e, "plob": plob_bound(e), "tgw": tgw_bound(e)} for e in args.eta_grid]
    out, close = _open_out(args.out)
    write_csv(rows, ("eta", "plob", "tgw"), out)
    if close:
        out.close()
    return 0


def cmd_expected(args) -> int:
    """Expected (noise-free) ledger for a config, written as JSON."""
    rc = load_config(args.config)
    if rc.channel is None or rc.source_a is None or rc.slice is None:
        raise ConfigError(["expected needs [source], [channel] with eta_A/eta_B, and [slice]"])
    led = expected_ledger(rc.source_a, rc.source_b or rc.source_a, rc.channel, rc.slice, rc.n_total or 7.2e11)
    rep = key_rate(led, rc.source_a, rc.budget, slice_halfwidth=rc.slice.Ds, cfg_b=rc.source_b)
    print(rep.summary())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="snstf", description="SNS twin-field QKD finite-key workbench")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="key rate and bounds for one or more ledgers")
    a.add_argument("--ledger", action="append", help="ledger JSON file (repeatable)")
    a.add_argument("--golden", action="append", choices=GOLDEN_LABELS, help="bundled dataset label (repeatable)")
    a.add_argument("--all-golden", action="store_true", help="analyze every bundled dataset")
    a.add_argument("--config", help="TOML run configuration")
    a.add_argument("--csv", help="summary CSV ('-' for stdout)")
    a.add_argument("--json", help="machine-readable reports")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="pulse-level Monte Carlo run")
    s.add_argument("--config", required=True)
    s.add_argument("--frames", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="key rate against distance with capacity bounds")
    w.add_argument("--config")
    w.add_argument("--from", dest="from_km", type=float)
    w.add_argument("--to", dest="to_km", type=float)
    w.add_argument("--step", dest="step_km", type=float)
    w.add_argument("--out", help="CSV file (default stdout)")
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("scan", help="key rate over a (Ds, rc) post-selection grid")
    c.add_argument("--ledger", help="ledger JSON with a slice_scan block")
    c.add_argument("--run", help="directory written by 'simulate'")
    c.add_argument("--ds-grid", type=parse_list, default=None, help="half-widths in degrees, e.g. 1,2,4 or 1:15:15")
    c.add_argument("--rc-grid", type=parse_list, default=None)
    c.add_argument("--config")
    c.add_argument("--out", help="CSV file (default stdout)")
    c.set_defaults(func=cmd_scan)

    b = sub.add_parser("bounds", help="PLOB and TGW capacities on a transmittance grid")
    b.add_argument("--eta-grid", type=parse_list, required=True)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    e = sub.add_parser("expected", help="analyze the noise-free expected ledger of a config")
    e.add_argument("--config", required=True)
    e.set_defaults(func=cmd_expected)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.func is cmd_scan and args.run and (not args.ds_grid or not args.rc_grid):
        parser.error("scan --run needs --ds-grid and --rc-grid")
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return exc.exit_code
    except SnstfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
