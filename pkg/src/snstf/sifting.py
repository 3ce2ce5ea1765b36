"""Charlie-side filtering, phase-slice post-selection and ledger construction.

Events are kept in a numpy structured array with one record per effective
event (exactly one detector clicked).  Field order, also used by the
delimited text format, is :data:`EVENT_FIELDS`:

======================  ==========================================================
``frame``               frame counter (one frame = 100 signal slots + references)
``slot``                signal slot inside the frame
``ref_window``          index of the phase-estimation window covering the event
``basis_a/basis_b``     0 = Z, 1 = X
``intensity_a/_b``      0 vacuum/not-send, 1 = mu1, 2 = mu2, 3 = muz
``theta_a/theta_b``     encoded phases in radians
``detector``            1 or 2
``gate_pos``            arrival time inside the pulse, as a fraction in [0, 1]
======================  ==========================================================
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .decoy import IntensityProbabilityConfig, SecurityBudget, key_rate
from .errors import DomainError, LedgerSchemaError, PhaseReferenceError
from .ledger import CountsLedger
from .phase import PhaseEstimate, minor_angle

PLUS, MINUS, REJECT = "plus", "minus", "reject"

EVENT_FIELDS = (
    ("frame", "i8"),
    ("slot", "i2"),
    ("ref_window", "i8"),
    ("basis_a", "u1"),
    ("basis_b", "u1"),
    ("intensity_a", "u1"),
    ("intensity_b", "u1"),
    ("theta_a", "f8"),
    ("theta_b", "f8"),
    ("detector", "u1"),
    ("gate_pos", "f8"),
)
EVENT_DTYPE = np.dtype(list(EVENT_FIELDS))
BASIS_NAMES = ("Z", "X")


@dataclass(frozen=True)
class SliceConfig:
    """Post-selection settings.

    ``Ds`` is the half-width of each slice in radians.  ``plus_port`` is the
    detector expected to click for pairs in the plus slice; the minus slice
    expects the other one.
    """

    Ds: float
    rc_max: float = 1.0
    r_gate: float = 1.0
    plus_port: int = 1

    def __post_init__(self):
        problems = []
        if not 0 < self.Ds <= math.pi / 2:
            problems.append(f"Ds must lie in (0, pi/2], got {self.Ds}")
        if not 0 < self.rc_max <= 1:
            problems.append(f"rc_max must lie in (0, 1], got {self.rc_max}")
        if not 0 < self.r_gate <= 1:
            problems.append(f"r_gate must lie in (0, 1], got {self.r_gate}")
        if self.plus_port not in (1, 2):
            problems.append(f"plus_port must be 1 or 2, got {self.plus_port}")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def lambda_equiv(self) -> float:
        return 1 - math.cos(self.Ds)

    @property
    def Ds_deg(self) -> float:
        return math.degrees(self.Ds)

    @classmethod
    def from_degrees(cls, ds_deg: float, **kw) -> "SliceConfig":
        return cls(Ds=math.radians(ds_deg), **kw)


@dataclass(frozen=True)
class DetectionEvent:
    """One effective event, as a plain record."""

    frame: int
    slot: int
    ref_window: int
    basis_a: str
    basis_b: str
    intensity_a: int
    intensity_b: int
    theta_a: float
    theta_b: float
    detector: int
    gate_pos: float = 0.5


def events_from_records(records) -> np.ndarray:
    """Pack :class:`DetectionEvent` records into the structured event array."""
    records = list(records)
    out = np.zeros(len(records), dtype=EVENT_DTYPE)
    for i, r in enumerate(records):
        out[i] = (r.frame, r.slot, r.ref_window, BASIS_NAMES.index(r.basis_a), BASIS_NAMES.index(r.basis_b),
                  r.intensity_a, r.intensity_b, r.theta_a, r.theta_b, r.detector, r.gate_pos)
    return out


def events_to_records(events: np.ndarray) -> list:
    return [
        DetectionEvent(int(e["frame"]), int(e["slot"]), int(e["ref_window"]),
                       BASIS_NAMES[e["basis_a"]], BASIS_NAMES[e["basis_b"]],
                       int(e["intensity_a"]), int(e["intensity_b"]),
                       float(e["theta_a"]), float(e["theta_b"]), int(e["detector"]), float(e["gate_pos"]))
        for e in events
    ]


# -- post-selection ---------------------------------------------------------

def slice_accept(theta_a, theta_b, delta_phi_T, Ds):
    """Classify a relative phase as ``"plus"``, ``"minus"`` or ``"reject"``.

    Works on scalars; see :func:`slice_labels` for arrays.
    """
    rel = theta_a - theta_b + delta_phi_T
    if minor_angle(rel) <= Ds:
        return PLUS
    if minor_angle(rel - math.pi) <= Ds:
        return MINUS
    return REJECT


def slice_labels(rel_phase, Ds) -> np.ndarray:
    """Vectorised slices: +1 plus, -1 minus, 0 reject."""
    rel_phase = np.asarray(rel_phase, dtype=float)
    plus = minor_angle(rel_phase) <= Ds
    minus = (minor_angle(rel_phase - math.pi) <= Ds) & ~plus
    return plus.astype(np.int8) - minus.astype(np.int8)


def _estimate_arrays(estimates, n_needed):
    """Normalise estimates to ``(phi, rc, present)`` arrays indexed by window."""
    if isinstance(estimates, dict):
        size = max(max(estimates, default=-1) + 1, n_needed)
        phi, rc, present = np.zeros(size), np.ones(size), np.zeros(size, dtype=bool)
        for k, est in estimates.items():
            phi[k], rc[k], present[k] = est.delta_phi_T, est.rc, True
        return phi, rc, present
    if isinstance(estimates, tuple) and len(estimates) == 2:
        phi, rc = (np.asarray(a, dtype=float) for a in estimates)
        return phi, rc, np.isfinite(phi) & np.isfinite(rc)
    ests = list(estimates)
    phi = np.array([e.delta_phi_T for e in ests], dtype=float)
    rc = np.array([e.rc for e in ests], dtype=float)
    return phi, rc, np.ones(len(ests), dtype=bool)


def keep_mask(events: np.ndarray, rc: np.ndarray, cfg: SliceConfig) -> np.ndarray:
    """Uniform filters: digital gate and rc threshold.

    Depends only on ``gate_pos`` and the covering window's ``rc``.
    """
    gate = np.abs(events["gate_pos"] - 0.5) <= 0.5 * cfg.r_gate + 1e-12
    return gate & (rc[events["ref_window"]] <= cfg.rc_max)


def category_codes(basis_a, basis_b, intensity_a, intensity_b) -> np.ndarray:
    """Integer code ``16*(2*ba+bb) + 4*ia + ib`` for fast tallies."""
    return 16 * (2 * basis_a.astype(np.int64) + basis_b) + 4 * intensity_a.astype(np.int64) + intensity_b


def code_name(code: int) -> str:
    pair = code // 16
    ia, ib = divmod(code % 16, 4)
    return BASIS_NAMES[pair // 2] + BASIS_NAMES[pair % 2] + f"{ia}{ib}"


def build_ledger(events: np.ndarray, sent: dict, estimates, cfg: SliceConfig, n_total=None,
                 label: str = "", parameters: dict | None = None) -> CountsLedger:
    """Fold an event array into a :class:`CountsLedger`.

    ``sent`` maps category codes (``"ZZ"``, ``"XX11"``, ...) to pair counts.
    ``estimates`` holds one :class:`PhaseEstimate` per reference window, as a
    sequence indexed by window, a dict, or an ``(phi, rc)`` tuple of arrays
    with NaN marking a missing window.

    Filtered events become no-clicks: sent counts are untouched.  In the Z
    basis an event is correct when exactly one party sent.
    """
    events = np.asarray(events)
    if events.dtype != EVENT_DTYPE:
        raise DomainError("events must use the sifting event dtype")
    n_windows = int(events["ref_window"].max()) + 1 if len(events) else 0
    phi, rc, present = _estimate_arrays(estimates, n_windows)
    if len(events):
        if n_windows > len(present) or not present[events["ref_window"]].all():
            idx = events["ref_window"]
            bad = idx[(idx >= len(present))] if n_windows > len(present) else idx[~present[idx]]
            raise PhaseReferenceError(f"no phase estimate for reference window {int(bad[0])}")

    ev = events[keep_mask(events, rc, cfg)]
    det = ev["detector"]
    valid = (int(np.count_nonzero(det == 1)), int(np.count_nonzero(det == 2)))

    z_both = (ev["basis_a"] == 0) & (ev["basis_b"] == 0)
    zz = ev[z_both]
    one_sent = (zz["intensity_a"] == 3) != (zz["intensity_b"] == 3)
    zz_correct = int(np.count_nonzero(one_sent))
    zz_error = len(zz) - zz_correct

    rest = ev[~z_both]
    codes = category_codes(rest["basis_a"], rest["basis_b"], rest["intensity_a"], rest["intensity_b"])
    uniq, counts = np.unique(codes, return_counts=True)
    detected = {code_name(int(c)): int(n) for c, n in zip(uniq, counts)}
    for code in sent:
        if code != "ZZ":
            detected.setdefault(code, 0)

    xx11 = rest[(rest["basis_a"] == 1) & (rest["basis_b"] == 1) & (rest["intensity_a"] == 1) & (rest["intensity_b"] == 1)]
    rel = xx11["theta_a"] - xx11["theta_b"] + phi[xx11["ref_window"]]
    lab = slice_labels(rel, cfg.Ds)
    slice_detected, slice_correct = [], []
    for port in (1, 2):
        on_port = xx11["detector"] == port
        in_slice = on_port & (lab != 0)
        expected = (lab == 1) if port == cfg.plus_port else (lab == -1)
        slice_detected.append(int(np.count_nonzero(in_slice)))
        slice_correct.append(int(np.count_nonzero(on_port & expected)))

    params = dict(parameters or {})
    params.setdefault("Ds_deg", cfg.Ds_deg)
    params.setdefault("rc", cfg.rc_max)
    params.setdefault("r_gate", cfg.r_gate)
    return CountsLedger(
        sent=dict(sent), detected=detected,
        slice_detected=tuple(slice_detected), slice_correct=tuple(slice_correct),
        zz_error=zz_error, zz_correct=zz_correct, valid=valid,
        n_total=n_total, label=label, parameters=params,
    )


def recount(events, sent, estimates, cfg: SliceConfig):
    """Slow event-by-event tally, kept as an independent check of :func:`build_ledger`.

    Returns ``(detected, slice_detected, slice_correct, zz_error, zz_correct)``.
    """
    phi, rc, present = _estimate_arrays(estimates, 0)
    detected = {}
    sdet, scor = [0, 0], [0, 0]
    zz_err = zz_ok = 0
    for rec in events_to_records(events):
        if abs(rec.gate_pos - 0.5) > 0.5 * cfg.r_gate + 1e-12 or rc[rec.ref_window] > cfg.rc_max:
            continue
        if rec.basis_a == "Z" and rec.basis_b == "Z":
            if (rec.intensity_a == 3) != (rec.intensity_b == 3):
                zz_ok += 1
            else:
                zz_err += 1
            continue
        code = f"{rec.basis_a}{rec.basis_b}{rec.intensity_a}{rec.intensity_b}"
        detected[code] = detected.get(code, 0) + 1
        if code == "XX11":
            where = slice_accept(rec.theta_a, rec.theta_b, phi[rec.ref_window], cfg.Ds)
            if where == REJECT:
                continue
            sdet[rec.detector - 1] += 1
            expected = cfg.plus_port if where == PLUS else 3 - cfg.plus_port
            if rec.detector == expected:
                scor[rec.detector - 1] += 1
    return detected, tuple(sdet), tuple(scor), zz_err, zz_ok


# -- scans ----------------------------------------------------------------------

@dataclass
class ScanCell:
    ds_deg: float
    rc: float
    qber_x11: float
    detections_x11: float
    R: float


def scan_postselection(events, sent, estimates, ds_grid, rc_grid, cfg_a: IntensityProbabilityConfig,
                       budget: SecurityBudget, n_total, r_gate: float = 1.0, cfg_b=None, plus_port: int = 1):
    """Rebuild the ledger and key rate for every ``(Ds, rc)`` cell.

    ``ds_grid`` is in degrees.  Returns ``(cells, best)`` with cells in
    rc-major order and ``best`` the first cell with the largest R.
    """
    ds_grid, rc_grid = list(ds_grid), list(rc_grid)
    if not ds_grid or not rc_grid:
        raise DomainError("scan grids must be non-empty")
    cells = []
    for rc in rc_grid:
        for ds in ds_grid:
            cfg = SliceConfig.from_degrees(ds, rc_max=rc, r_gate=r_gate, plus_port=plus_port)
            ledger = build_ledger(events, sent, estimates, cfg, n_total=n_total)
            cells.append(_cell(ledger, ds, rc, cfg_a, budget, n_total, cfg_b))
    return cells, _best(cells)


def _cell(ledger, ds, rc, cfg_a, budget, n_total, cfg_b=None):
    det = sum(ledger.slice_detected)
    qber = ledger.qber_x11
    try:
        R = key_rate(ledger, cfg_a, budget, n_total=n_total, slice_halfwidth=math.radians(ds), cfg_b=cfg_b).R
    except DomainError:
        R = 0.0
    return ScanCell(ds_deg=ds, rc=rc, qber_x11=qber, detections_x11=det, R=R)


def _best(cells):
    best = cells[0]
    for c in cells[1:]:
        if c.R > best.R:
            best = c
    return best


def scan_table_ledger(base: CountsLedger, detections_x11: float, qber_x11: float, ds_deg: float,
                      rc: float, kept_fraction: float = 1.0) -> CountsLedger:
    """Ledger for one cell of a published (Ds, rc) scan.

    The scan tables give only the XX11 slice totals.  The rc filter drops
    events uniformly over categories, so every other detection row is the
    base row scaled by ``kept_fraction``, the share of detections that the
    cell's rc keeps relative to the base ledger's rc.  Sent rows are
    unchanged.  Slice totals are split between detectors in the base
    ledger's proportions; only the totals enter the key rate.
    """
    errors = round(detections_x11 * qber_x11)
    total = int(round(detections_x11))
    d1, d2 = base.slice_detected
    share = d1 / (d1 + d2) if d1 + d2 else 0.5
    det1 = int(round(total * share))
    det2 = total - det1
    e1, e2 = base.slice_errors
    eshare = e1 / (e1 + e2) if e1 + e2 else 0.5
    err1 = min(det1, int(round(errors * eshare)))
    err2 = min(det2, errors - err1)

    def scaled(v):
        return None if v is None else int(round(v * kept_fraction))

    valid = None if base.valid is None else tuple(scaled(v) for v in base.valid)
    params = dict(base.parameters, Ds_deg=ds_deg, rc=rc)
    return CountsLedger(
        sent=dict(base.sent), detected={k: scaled(v) for k, v in base.detected.items()},
        slice_detected=(det1, det2), slice_correct=(det1 - err1, det2 - err2),
        zz_error=scaled(base.zz_error), zz_correct=scaled(base.zz_correct), valid=valid,
        n_total=base.n_total, label=f"{base.label} Ds={ds_deg:g} rc={rc:g}", parameters=params,
        distance_km=base.distance_km,
    )


def scan_golden_table(base: CountsLedger, scan: dict, budget: SecurityBudget, cfg_a=None):
    """Key rate for every cell of a bundled ``slice_scan`` block.

    Kept fractions come from the XX11 detection grid: a cell keeps
    ``det(rc, Ds) / det(rc_base, Ds)`` of the base ledger's detections.
    The cell matching the base ledger's own settings uses the base ledger
    as is, since the tables round the QBER to three digits.
    """
    cfg_a = cfg_a or IntensityProbabilityConfig.from_parameters(base.parameters)
    det = scan["detected_x11"]
    base_rc = base.parameters.get("rc")
    base_row = scan["rc"].index(base_rc) if base_rc in scan["rc"] else None
    cells = []
    for i, rc in enumerate(scan["rc"]):
        for j, ds in enumerate(scan["ds_deg"]):
            frac = 1.0 if base_row is None or not det[base_row][j] else det[i][j] / det[base_row][j]
            if i == base_row and ds == base.parameters.get("Ds_deg") and det[i][j] == sum(base.slice_detected):
                led = base
            else:
                led = scan_table_ledger(base, det[i][j], scan["qber_x11"][i][j], ds, rc, kept_fraction=frac)
            cells.append(_cell(led, ds, rc, cfg_a, budget, base.n_total))
    return cells, _best(cells)


# -- delimited text I/O -------------------------------------------------------------

def _fmt(name, value):
    if name in ("theta_a", "theta_b", "gate_pos"):
        return repr(float(value))
    return str(int(value))


def write_events(events: np.ndarray, stream) -> None:
    """Write events as comma-separated text with a header row."""
    names = EVENT_DTYPE.names
    stream.write(",".join(names) + "\n")
    cols = [events[n] for n in names]
    for row in zip(*cols):
        stream.write(",".join(_fmt(n, v) for n, v in zip(names, row)) + "\n")


def read_events(stream) -> np.ndarray:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise LedgerSchemaError("event file is empty") from None
    if tuple(header) != EVENT_DTYPE.names:
        raise LedgerSchemaError(f"event header must be {','.join(EVENT_DTYPE.names)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise LedgerSchemaError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            rows.append(tuple(float(v) if n in ("theta_a", "theta_b", "gate_pos") else int(v)
                              for n, v in zip(header, row)))
        except ValueError:
            raise LedgerSchemaError(f"line {lineno}: malformed number") from None
    return np.array(rows, dtype=EVENT_DTYPE)


def events_to_text(events: np.ndarray) -> str:
    buf = io.StringIO()
    write_events(events, buf)
    return buf.getvalue()


def events_from_text(text: str) -> np.ndarray:
    return read_events(io.StringIO(text))


def estimates_from_arrays(phi, rc) -> list:
    return [PhaseEstimate(float(p), float(r), 0.0, window_index=i) for i, (p, r) in enumerate(zip(phi, rc))]
