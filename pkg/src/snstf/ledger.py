"""Counts ledger: pulse-pair and detection tallies, plus the JSON file format.

Categories are named like the experimental result tables: a basis pair
(``ZZ``, ``ZX``, ``XZ``, ``XX``; Alice first) followed by two intensity digits
(0 vacuum or not-sending, 1 = mu1, 2 = mu2, 3 = muz).  ``Sent-ZX30`` is the
number of pulse pairs where Alice sent muz in the Z basis and Bob sent vacuum
in the X basis.  Z-basis pairs are kept as one total, ``Sent-ZZ``, with the
sampled outcomes in ``Detected-ZZError`` and ``Detected-ZZCorrect``.

File layout (JSON)::

    {
      "schema": "snstf-ledger",
      "schema_version": 1,
      "label": "150 km",
      "distance_km": 150,
      "N_total": 720000000000,
      "parameters": {...},      # intensities, probabilities, filters
      "reported": {...},        # published/derived figures, informational
      "rows": {"Sent-ZZ": 352447400000, ..., "Detected-ZZCorrect": 17435775}
    }

Every row of :data:`TABLE_ROWS` must be present (``null`` allowed); extra
rows are accepted only if they follow the category grammar.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import IncompleteLedgerError, LedgerSchemaError

SCHEMA = "snstf-ledger"
SCHEMA_VERSION = 1

# Categories printed in the published tables, in table order.
TABLE_CATEGORIES = (
    "ZX00", "ZX01", "ZX02", "ZX30",
    "XZ00", "XZ10", "XZ20", "XZ03",
    "XX00", "XX01", "XX02", "XX10", "XX20", "XX11", "XX22",
)

TABLE_ROWS = (
    ("Sent-ZZ",)
    + tuple(f"Sent-{c}" for c in TABLE_CATEGORIES)
    + ("Detected-Valid-Det1", "Detected-Valid-Det2")
    + tuple(f"Detected-{c}" for c in TABLE_CATEGORIES)
    + (
        "Detected-XX11-Ds-Ch1", "Detected-XX11-Ds-Ch2",
        "Correct-XX11-Ds-Ch1", "Correct-XX11-Ds-Ch2",
        "Detected-ZZError", "Detected-ZZCorrect",
    )
)

HEADER_KEYS = ("schema_version", "label", "N_total", "parameters", "rows")

_CATEGORY_RE = re.compile(r"^(ZX|XZ|XX)([0-3])([0-3])$")
_ROW_RE = re.compile(r"^(Sent|Detected)-(ZZ|(?:ZX|XZ|XX)[0-3][0-3])$")


def category(basis_a: str, basis_b: str, intensity_a: int, intensity_b: int) -> str:
    """Category code for one pulse pair, e.g. ``category("X", "Z", 1, 0) == "XZ10"``."""
    if basis_a == "Z" and basis_b == "Z":
        return "ZZ"
    return f"{basis_a}{basis_b}{intensity_a}{intensity_b}"


def is_valid_category(code: str) -> bool:
    """True when ``code`` names a pulse-pair category the SNS protocol can emit."""
    if code == "ZZ":
        return True
    m = _CATEGORY_RE.match(code)
    if not m:
        return False
    basis, ia, ib = m.group(1), int(m.group(2)), int(m.group(3))
    # X-basis parties never emit 3; Z-basis parties only emit 0 or 3
    for b, i in zip(basis, (ia, ib)):
        if b == "X" and i == 3:
            return False
        if b == "Z" and i not in (0, 3):
            return False
    return True


@dataclass
class CountsLedger:
    """Tallies of sent pulse pairs and effective (single-click) events.

    Counts are integers for measured or Monte Carlo ledgers and real-valued
    for expected-value ledgers from the analytic simulator.
    """

    sent: dict
    detected: dict
    slice_detected: tuple = (0, 0)
    slice_correct: tuple = (0, 0)
    zz_error: float = 0
    zz_correct: float = 0
    valid: tuple | None = None
    n_total: float | None = None
    label: str = ""
    parameters: dict = field(default_factory=dict)
    reported: dict = field(default_factory=dict)
    distance_km: float | None = None

    def __post_init__(self):
        for name, table in (("Sent", self.sent), ("Detected", self.detected)):
            for key, value in table.items():
                if not is_valid_category(key):
                    raise LedgerSchemaError(f"unknown category {name}-{key}")
                _check_count(f"{name}-{key}", value)
        if "ZZ" in self.detected:
            raise LedgerSchemaError("Z-basis detections go in zz_error/zz_correct")
        for ch in (0, 1):
            _check_count("slice detected", self.slice_detected[ch])
            _check_count("slice correct", self.slice_correct[ch])
            if self.slice_correct[ch] > self.slice_detected[ch]:
                raise LedgerSchemaError(
                    f"Correct-XX11-Ds-Ch{ch + 1} exceeds Detected-XX11-Ds-Ch{ch + 1}"
                )
        _check_count("Detected-ZZError", self.zz_error)
        _check_count("Detected-ZZCorrect", self.zz_correct)

    # -- access -----------------------------------------------------------
    def sent_count(self, code: str) -> float:
        try:
            value = self.sent[code]
        except KeyError:
            raise IncompleteLedgerError(f"Sent-{code}") from None
        if value is None:
            raise IncompleteLedgerError(f"Sent-{code}")
        return value

    def detected_count(self, code: str) -> float:
        try:
            value = self.detected[code]
        except KeyError:
            raise IncompleteLedgerError(f"Detected-{code}") from None
        if value is None:
            raise IncompleteLedgerError(f"Detected-{code}")
        return value

    @property
    def slice_errors(self) -> tuple:
        """Wrong-port clicks per detector inside the XX11 slices."""
        return tuple(d - c for d, c in zip(self.slice_detected, self.slice_correct))

    @property
    def qber_z(self) -> float:
        total = self.zz_error + self.zz_correct
        return self.zz_error / total if total else 0.0

    @property
    def qber_x11(self) -> float:
        total = sum(self.slice_detected)
        return sum(self.slice_errors) / total if total else 0.0

    def total_detected(self) -> float:
        """Effective events over every category, Z basis included."""
        return sum(v for v in self.detected.values() if v is not None) + self.zz_error + self.zz_correct

    # -- arithmetic -------------------------------------------------------
    def merge(self, other: "CountsLedger") -> "CountsLedger":
        """Component-wise sum of two partial ledgers over disjoint event sets."""
        def add(a, b):
            out = dict(a)
            for k, v in b.items():
                out[k] = out.get(k, 0) + v
            return out

        valid = None
        if self.valid is not None and other.valid is not None:
            valid = tuple(x + y for x, y in zip(self.valid, other.valid))
        n_total = None
        if self.n_total is not None and other.n_total is not None:
            n_total = self.n_total + other.n_total
        return CountsLedger(
            sent=add(self.sent, other.sent),
            detected=add(self.detected, other.detected),
            slice_detected=tuple(x + y for x, y in zip(self.slice_detected, other.slice_detected)),
            slice_correct=tuple(x + y for x, y in zip(self.slice_correct, other.slice_correct)),
            zz_error=self.zz_error + other.zz_error,
            zz_correct=self.zz_correct + other.zz_correct,
            valid=valid,
            n_total=n_total,
            label=self.label,
            parameters=dict(self.parameters),
        )

    def is_integral(self) -> bool:
        values = list(self.sent.values()) + list(self.detected.values())
        values += list(self.slice_detected) + list(self.slice_correct)
        values += [self.zz_error, self.zz_correct]
        if self.valid is not None:
            values += list(self.valid)
        return all(v is None or float(v).is_integer() for v in values)

    # -- rows view --------------------------------------------------------
    def rows(self) -> dict:
        """Flat mapping keyed by the published row labels."""
        out = {}
        out["Sent-ZZ"] = self.sent.get("ZZ")
        for c in TABLE_CATEGORIES:
            out[f"Sent-{c}"] = self.sent.get(c)
        valid = self.valid if self.valid is not None else (None, None)
        out["Detected-Valid-Det1"], out["Detected-Valid-Det2"] = valid
        for c in TABLE_CATEGORIES:
            out[f"Detected-{c}"] = self.detected.get(c)
        out["Detected-XX11-Ds-Ch1"], out["Detected-XX11-Ds-Ch2"] = self.slice_detected
        out["Correct-XX11-Ds-Ch1"], out["Correct-XX11-Ds-Ch2"] = self.slice_correct
        out["Detected-ZZError"] = self.zz_error
        out["Detected-ZZCorrect"] = self.zz_correct
        for c in sorted(set(self.sent) - set(TABLE_CATEGORIES) - {"ZZ"}):
            out[f"Sent-{c}"] = self.sent[c]
        for c in sorted(set(self.detected) - set(TABLE_CATEGORIES)):
            out[f"Detected-{c}"] = self.detected[c]
        return out

    @classmethod
    def from_rows(cls, rows: dict, **header) -> "CountsLedger":
        sent, detected = {}, {}
        for key, value in rows.items():
            m = _ROW_RE.match(key)
            if m:
                if value is not None:
                    (sent if m.group(1) == "Sent" else detected)[m.group(2)] = value
        if "ZZ" in detected:
            raise LedgerSchemaError("unknown row 'Detected-ZZ'")

        def pair(a, b):
            return (rows.get(a) or 0, rows.get(b) or 0)

        valid = None
        if rows.get("Detected-Valid-Det1") is not None and rows.get("Detected-Valid-Det2") is not None:
            valid = (rows["Detected-Valid-Det1"], rows["Detected-Valid-Det2"])
        return cls(
            sent=sent,
            detected=detected,
            slice_detected=pair("Detected-XX11-Ds-Ch1", "Detected-XX11-Ds-Ch2"),
            slice_correct=pair("Correct-XX11-Ds-Ch1", "Correct-XX11-Ds-Ch2"),
            zz_error=rows.get("Detected-ZZError") or 0,
            zz_correct=rows.get("Detected-ZZCorrect") or 0,
            valid=valid,
            **header,
        )


def _check_count(name, value):
    if value is None:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise LedgerSchemaError(f"{name}: malformed number {value!r}")
    if not math.isfinite(value) or value < 0:
        raise LedgerSchemaError(f"{name}: negative or non-finite count {value!r}")


def _parse_int(key, value):
    if value is None:
        return None
    if isinstance(value, bool):
        raise LedgerSchemaError(f"{key}: malformed number {value!r}")
    if isinstance(value, float) and value.is_integer() and abs(value) <= 2**53:
        value = int(value)
    if not isinstance(value, int):
        raise LedgerSchemaError(f"{key}: malformed number {value!r}")
    if value < 0:
        raise LedgerSchemaError(f"{key}: negative count {value}")
    return value


def ledger_to_dict(ledger: CountsLedger) -> dict:
    if not ledger.is_integral():
        raise LedgerSchemaError("ledger files hold integer counts; this ledger has expected values")
    rows = {k: (None if v is None else int(v)) for k, v in ledger.rows().items()}
    n_total = ledger.n_total
    if n_total is not None and float(n_total).is_integer():
        n_total = int(n_total)
    return {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "label": ledger.label,
        "distance_km": ledger.distance_km,
        "N_total": n_total,
        "parameters": dict(ledger.parameters),
        "reported": dict(ledger.reported),
        "rows": rows,
    }


def ledger_from_dict(doc: dict) -> CountsLedger:
    if not isinstance(doc, dict):
        raise LedgerSchemaError("ledger document must be a JSON object")
    for key in HEADER_KEYS:
        if key not in doc:
            raise LedgerSchemaError(f"missing required key {key!r}")
    if doc.get("schema", SCHEMA) != SCHEMA:
        raise LedgerSchemaError(f"unsupported schema {doc['schema']!r}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise LedgerSchemaError(f"unsupported schema_version {doc['schema_version']!r}")
    known_header = set(HEADER_KEYS) | {"schema", "distance_km", "reported", "slice_scan"}
    for key in doc:
        if key not in known_header:
            raise LedgerSchemaError(f"unknown key {key!r}")
    rows_in = doc["rows"]
    if not isinstance(rows_in, dict):
        raise LedgerSchemaError("'rows' must be an object")
    for key in TABLE_ROWS:
        if key not in rows_in:
            raise LedgerSchemaError(f"missing required row {key!r}")
    rows = {}
    for key, value in rows_in.items():
        if key not in TABLE_ROWS:
            m = _ROW_RE.match(key)
            if not m or not is_valid_category(m.group(2)) or key == "Detected-ZZ":
                raise LedgerSchemaError(f"unknown row {key!r}")
        rows[key] = _parse_int(key, value)
    n_total = doc["N_total"]
    if n_total is not None:
        n_total = _parse_int("N_total", n_total)
    return CountsLedger.from_rows(
        rows,
        n_total=n_total,
        label=str(doc["label"]),
        parameters=dict(doc["parameters"] or {}),
        reported=dict(doc.get("reported") or {}),
        distance_km=doc.get("distance_km"),
    )


def save_ledger(ledger: CountsLedger, path) -> None:
    doc = ledger_to_dict(ledger)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_ledger(path) -> CountsLedger:
    text = Path(path).read_text()
    return ledger_from_text(text)


def ledger_from_text(text: str) -> CountsLedger:
    if not text.strip():
        doc = {}
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LedgerSchemaError(f"not valid JSON: {exc}") from None
    return ledger_from_dict(doc)


# -- bundled experimental ledgers -------------------------------------------

GOLDEN_FILES = {
    "0 km": "golden_000km.json",
    "50 km": "golden_050km.json",
    "100 km": "golden_100km.json",
    "150 km": "golden_150km.json",
    "100 km*": "golden_100km_star.json",
    "200 km*": "golden_200km_star.json",
    "300 km*": "golden_300km_star.json",
}
GOLDEN_LABELS = tuple(GOLDEN_FILES)


def golden_path(label: str):
    """Path-like handle to a bundled golden ledger."""
    try:
        name = GOLDEN_FILES[label]
    except KeyError:
        raise KeyError(f"no golden ledger {label!r}; choose from {GOLDEN_LABELS}") from None
    return resources.files("snstf") / "data" / name


def load_golden(label: str) -> CountsLedger:
    return ledger_from_text(golden_path(label).read_text())


def load_golden_document(label: str) -> dict:
    """Raw JSON document, including the optional ``slice_scan`` table."""
    return json.loads(golden_path(label).read_text())
