import json
import math

import numpy as np
import pandas as pd
import pytest

from calibration import load_reference_model
from diffusion_core import DensityCurve
from errors import DataValidationError
from io_utils import (
    dumps_json,
    load_json_data,
    load_model,
    read_debt_csv,
    read_equity_csv,
    read_index_csv,
    read_wacc_inputs_csv,
    save_json_data,
    write_curve_csv,
    write_table_csv,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_read_equity_csv(tmp_path):
    path = _write(tmp_path / "equity.csv",
                  "date,equity_value\n2013-12-27,135.1\n2013-12-30, 135.3\n2013-12-31,135.43\n")
    series = read_equity_csv(path)
    assert series.name == "equity_value"
    assert series.index[-1] == pd.Timestamp("2013-12-31")
    assert series.tolist() == [135.1, 135.3, 135.43]


def test_missing_column_points_at_header(tmp_path):
    path = _write(tmp_path / "debt.csv", "date,debt\n2013-12-31,157.55\n")
    with pytest.raises(DataValidationError) as info:
        read_debt_csv(path)
    assert info.value.line == 1
    assert info.value.column == "debt_value"


@pytest.mark.parametrize("body, line, column", [
    ("2013-09-30,141.9\n2013-13-31,157.55\n", 3, "date"),
    ("2013-09-30,141.9\n2013-12-31,n/a\n", 3, "debt_value"),
    ("2013-09-30,-1\n2013-12-31,157.55\n", 2, "debt_value"),
    ("2013-09-30,141.9\n2013-12-31,157.55\n2013-12-31,160.0\n", 4, "date"),
    ("2013-12-31,157.55\n2013-09-30,141.9\n", 3, "date"),
])
def test_bad_rows_report_physical_line(tmp_path, body, line, column):
    path = _write(tmp_path / "debt.csv", "date,debt_value\n" + body)
    with pytest.raises(DataValidationError) as info:
        read_debt_csv(path)
    assert info.value.line == line
    assert info.value.column == column
    assert f"line {line}" in str(info.value)


def test_index_returns_may_be_negative(tmp_path):
    path = _write(tmp_path / "index.csv", "date,return\n2013-12-30,-0.012\n2013-12-31,0.004\n")
    assert read_index_csv(path).tolist() == [-0.012, 0.004]


def test_missing_and_empty_files(tmp_path):
    with pytest.raises(DataValidationError):
        read_equity_csv(tmp_path / "absent.csv")
    with pytest.raises(DataValidationError):
        read_equity_csv(_write(tmp_path / "empty.csv", ""))
    with pytest.raises(DataValidationError) as info:
        read_equity_csv(_write(tmp_path / "header_only.csv", "date,equity_value\n"))
    assert info.value.line == 2


def test_read_wacc_inputs_csv(tmp_path):
    header = "equity_value,debt_value,interest_paid,prior_debt_value,index_annual_return,risk_free,beta\n"
    path = _write(tmp_path / "wacc.csv", header + "135.43,157.55,18.95,117.05,0.3832,0.0013,1.426\n")
    inputs = read_wacc_inputs_csv(path)
    assert inputs.beta == pytest.approx(1.426)
    assert inputs.tax_rate == pytest.approx(0.35)

    two_rows = _write(tmp_path / "two.csv", header + "1,1,0,1,0.1,0,1\n2,2,0,2,0.1,0,1\n")
    with pytest.raises(DataValidationError):
        read_wacc_inputs_csv(two_rows)

    missing = _write(tmp_path / "missing.csv", "equity_value,debt_value\n1,1\n")
    with pytest.raises(DataValidationError) as info:
        read_wacc_inputs_csv(missing)
    assert info.value.line == 2
    assert info.value.column == "interest_paid"


def test_dumps_json_handles_numpy_and_non_finite():
    text = dumps_json({"p": np.float64(0.1) + np.float64(0.2), "n": np.int64(3), "bad": math.nan,
                       "arr": np.array([1.5, math.inf])})
    data = json.loads(text)
    assert data["p"] == 0.1 + 0.2
    assert data["n"] == 3
    assert data["bad"] is None
    assert data["arr"] == [1.5, None]


def test_dumps_json_writes_seventeen_digits():
    text = dumps_json({"p": 0.1, "whole": 2.0, "tiny": 1e-20, "label": "0.1", "flag": True, "n": 4})
    assert '"p": 0.10000000000000001' in text
    assert '"whole": 2.0' in text
    assert '"tiny": 9.9999999999999995e-21' in text
    assert '"label": "0.1"' in text
    data = json.loads(text)
    assert data == {"p": 0.1, "whole": 2.0, "tiny": 1e-20, "label": "0.1", "flag": True, "n": 4}
    assert isinstance(data["whole"], float)


def test_json_round_trip(tmp_path):
    path = tmp_path / "out" / "payload.json"
    save_json_data({"alpha_star": -0.23668901234567891, "label": "2013-12"}, path)
    assert path.read_text(encoding="utf-8").endswith("}\n")
    assert load_json_data(path) == {"alpha_star": -0.23668901234567891, "label": "2013-12"}


def test_load_json_data_errors(tmp_path):
    with pytest.raises(DataValidationError):
        load_json_data(tmp_path / "absent.json")
    broken = _write(tmp_path / "broken.json", '{\n  "nu": 1,\n  oops\n}')
    with pytest.raises(DataValidationError) as info:
        load_json_data(broken)
    assert info.value.line == 3


def test_model_round_trip(tmp_path):
    model = load_reference_model("2013-12")
    payload = model.model_dump()
    payload["iterations"] = 12
    save_json_data(payload, tmp_path / "model.json")
    loaded = load_model(tmp_path / "model.json")
    assert loaded.nu == model.nu
    assert loaded.spec == model.spec
    assert loaded.label == "2013-12"

    _write(tmp_path / "bad_model.json", json.dumps({"nu": 0.1, "sigma": -1.0, "r": 0.0, "A0": 2.0, "D0": 1.0}))
    with pytest.raises(DataValidationError) as info:
        load_model(tmp_path / "bad_model.json")
    assert info.value.column == "sigma"


def test_curve_and_table_csv(tmp_path):
    curve = DensityCurve(grid=[0.1, 0.2, 0.4], values=[1.0 / 3.0, 0.5, 2.0 / 3.0], kind="density")
    path = tmp_path / "curve.csv"
    write_curve_csv(curve, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,value"
    assert len(lines) == 4
    frame = pd.read_csv(path)
    assert frame["value"].tolist() == [1.0 / 3.0, 0.5, 2.0 / 3.0]

    table_path = tmp_path / "nested" / "table.csv"
    write_table_csv(pd.DataFrame({"rstar": [1.25], "strategy": ["no_change"]}), table_path)
    assert table_path.read_text(encoding="utf-8") == "rstar,strategy\n1.25,no_change\n"
