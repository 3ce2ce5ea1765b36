import json
from dataclasses import replace

import pytest

from snstf.errors import IncompleteLedgerError, LedgerSchemaError
from snstf.ledger import (GOLDEN_LABELS, CountsLedger, ledger_from_dict, ledger_to_dict, load_golden,
                          load_golden_document, load_ledger, save_ledger)


def small_ledger(**kw):
    base = dict(sent={"ZZ": 100, "XX11": 50, "XX00": 20}, detected={"XX11": 9, "XX00": 1},
                slice_detected=(3, 2), slice_correct=(2, 2), zz_error=1, zz_correct=6, n_total=1000)
    base.update(kw)
    return CountsLedger(**base)


def test_all_golden_ledgers_load():
    for label in GOLDEN_LABELS:
        led = load_golden(label)
        assert led.is_integral()
        assert led.reported["R"] > 0
        assert sum(led.slice_correct) <= sum(led.slice_detected)


def test_roundtrip_through_json(tmp_path):
    led = load_golden("150 km")
    path = tmp_path / "l.json"
    save_ledger(led, path)
    again = load_ledger(path)
    assert again.rows() == led.rows()
    assert again.parameters == led.parameters


def test_qber_properties():
    led = small_ledger()
    assert led.qber_z == pytest.approx(1 / 7)
    assert led.qber_x11 == pytest.approx(1 / 5)
    assert led.slice_errors == (1, 0)


def test_exact_ratios_150km():
    led = load_golden("150 km")
    assert led.zz_error == 556383
    assert led.qber_z == pytest.approx(556383 / (556383 + led.zz_correct))


def test_missing_row_raises_with_row_name():
    led = small_ledger()
    with pytest.raises(IncompleteLedgerError) as info:
        led.sent_count("XZ00")
    assert "Sent-XZ00" in str(info.value)


def test_correct_exceeding_detected_rejected():
    with pytest.raises(LedgerSchemaError):
        small_ledger(slice_correct=(4, 2))


def test_negative_or_unknown_rejected():
    with pytest.raises(LedgerSchemaError):
        small_ledger(sent={"ZZ": -1})
    with pytest.raises(LedgerSchemaError):
        small_ledger(sent={"QQ11": 1})


def test_merge_adds_componentwise():
    a, b = small_ledger(), small_ledger()
    m = a.merge(b)
    assert m.sent["XX11"] == 100
    assert m.slice_detected == (6, 4)
    assert m.n_total == 2000


def test_from_rows_inverse_of_rows():
    led = load_golden("300 km*")
    again = CountsLedger.from_rows(led.rows())
    assert again.rows() == led.rows()


def test_schema_errors_in_documents():
    doc = ledger_to_dict(load_golden("0 km"))
    bad = json.loads(json.dumps(doc))
    bad["schema_version"] = 99
    with pytest.raises(LedgerSchemaError):
        ledger_from_dict(bad)
    bad = json.loads(json.dumps(doc))
    bad["rows"]["Sent-XX11"] = "many"
    with pytest.raises(LedgerSchemaError):
        ledger_from_dict(bad)


def test_golden_document_has_scan_block():
    doc = load_golden_document("150 km")
    scan = doc["slice_scan"]
    assert len(scan["rc"]) == len(scan["qber_x11"])
    assert len(scan["ds_deg"]) == len(scan["qber_x11"][0])


def test_real_valued_ledger_allowed():
    led = replace(small_ledger(), zz_error=0.5)
    assert not led.is_integral()
