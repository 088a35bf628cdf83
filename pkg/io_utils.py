"""CSV ingestion and JSON/CSV output.

Input CSVs are UTF-8 with a mandatory header row, ISO-8601 dates, '.' as the
decimal point and no thousands separators:

    equity.csv  date, equity_value
    debt.csv    date, debt_value      (quarter-ends)
    index.csv   date, return

Errors point at the physical line of the file (header = line 1).
"""
import json
import logging
import math
import re
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from calibration import FirmModel, WaccInputs
from diffusion_core import DensityCurve
from errors import DataValidationError

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"
JSON_FLOAT_FORMAT = ".17g"

# finite floats travel through json.dumps as marked strings and are unquoted afterwards
_FLOAT_MARK = "\x00float:"
_FLOAT_TOKEN = re.compile(r'"\\u0000float:([^"]+)"')

EQUITY_COLUMNS = ("date", "equity_value")
DEBT_COLUMNS = ("date", "debt_value")
INDEX_COLUMNS = ("date", "return")


def _line_of(row_position: int) -> int:
    return row_position + 2


# --- CSV Input ---
def read_series_csv(filepath, columns: tuple[str, str], positive: bool = True) -> pd.Series:
    """Reads a two-column dated CSV into a float Series indexed by date."""
    date_column, value_column = columns
    try:
        frame = pd.read_csv(filepath, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise DataValidationError("file not found", path=filepath) from None
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataValidationError(f"could not parse CSV: {e}", path=filepath) from e

    frame.columns = [str(c).strip() for c in frame.columns]
    for column in columns:
        if column not in frame.columns:
            raise DataValidationError(f"missing required column '{column}'", path=filepath, line=1,
                                      column=column)
    if frame.empty:
        raise DataValidationError("no data rows", path=filepath, line=2)

    dates = pd.to_datetime(frame[date_column].str.strip(), format="ISO8601", errors="coerce")
    bad_dates = np.flatnonzero(dates.isna().to_numpy())
    if bad_dates.size:
        i = int(bad_dates[0])
        raise DataValidationError(f"invalid ISO-8601 date '{frame[date_column].iloc[i]}'", path=filepath,
                                  line=_line_of(i), column=date_column)

    values = pd.to_numeric(frame[value_column].str.strip(), errors="coerce")
    bad_values = np.flatnonzero(~np.isfinite(values.to_numpy(dtype=float)))
    if bad_values.size:
        i = int(bad_values[0])
        raise DataValidationError(f"invalid number '{frame[value_column].iloc[i]}'", path=filepath,
                                  line=_line_of(i), column=value_column)
    if positive:
        non_positive = np.flatnonzero(values.to_numpy(dtype=float) <= 0.0)
        if non_positive.size:
            i = int(non_positive[0])
            raise DataValidationError("value must be positive", path=filepath, line=_line_of(i),
                                      column=value_column)

    out_of_order = np.flatnonzero(~(dates.diff().iloc[1:] > pd.Timedelta(0)).to_numpy())
    if out_of_order.size:
        i = int(out_of_order[0]) + 1
        raise DataValidationError("dates must be strictly increasing", path=filepath, line=_line_of(i),
                                  column=date_column)

    series = pd.Series(values.to_numpy(dtype=float), index=pd.DatetimeIndex(dates), name=value_column)
    logger.debug("Read %d rows from %s", len(series), filepath)
    return series


def read_equity_csv(filepath) -> pd.Series:
    return read_series_csv(filepath, EQUITY_COLUMNS)


def read_debt_csv(filepath) -> pd.Series:
    return read_series_csv(filepath, DEBT_COLUMNS)


def read_index_csv(filepath) -> pd.Series:
    return read_series_csv(filepath, INDEX_COLUMNS, positive=False)


def read_wacc_inputs_csv(filepath) -> WaccInputs:
    """A one-row CSV whose header names the WaccInputs fields."""
    try:
        frame = pd.read_csv(filepath, encoding="utf-8")
    except FileNotFoundError:
        raise DataValidationError("file not found", path=filepath) from None
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataValidationError(f"could not parse CSV: {e}", path=filepath) from e
    if len(frame) != 1:
        raise DataValidationError(f"expected exactly one data row, found {len(frame)}", path=filepath)
    row = {str(k).strip(): v.item() if isinstance(v, np.generic) else v
           for k, v in frame.iloc[0].dropna().items()}
    return _validated(WaccInputs, row, filepath, line=2)


def _validated(model_cls: type[BaseModel], data: dict, filepath, line=None):
    try:
        return model_cls.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        column = ".".join(str(part) for part in first["loc"]) or None
        raise DataValidationError(first["msg"], path=filepath, line=line, column=column) from e


# --- JSON ---
def load_json_data(filepath):
    """Loads data from a JSON file."""
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            data = json.load(f)
        logger.info(f"Successfully loaded data from {filepath}")
        return data
    except FileNotFoundError:
        raise DataValidationError("JSON file not found", path=filepath) from None
    except json.JSONDecodeError as e:
        raise DataValidationError(f"could not decode JSON: {e.msg}", path=filepath, line=e.lineno) from e


def _jsonable(value):
    if isinstance(value, BaseModel):
        return _jsonable(value.model_dump())
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return _float_token(value) if math.isfinite(value) else None
    return value


def _float_token(value: float) -> str:
    text = format(value, JSON_FLOAT_FORMAT)
    if not any(ch in text for ch in ".e"):
        text += ".0"
    return _FLOAT_MARK + text


def dumps_json(data) -> str:
    """Indented JSON with every float written to 17 significant digits."""
    text = json.dumps(_jsonable(data), indent=4, ensure_ascii=False, allow_nan=False)
    return _FLOAT_TOKEN.sub(r"\1", text)


def save_json_data(data, filepath):
    """Saves data to a JSON file."""
    Path(filepath).parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, 'w', encoding='utf-8') as f:
        f.write(dumps_json(data))
        f.write("\n")
    logger.info(f"Successfully saved data to {filepath}")


def load_model(filepath) -> FirmModel:
    """FirmModel from a model.json written by the calibrate command (extra keys ignored)."""
    data = load_json_data(filepath)
    if not isinstance(data, dict):
        raise DataValidationError("model file must hold a JSON object", path=filepath)
    return _validated(FirmModel, data, filepath)


# --- CSV Output ---
def write_curve_csv(curve: DensityCurve, filepath) -> None:
    """Two columns, t and value."""
    frame = pd.DataFrame({"t": curve.grid, "value": curve.values})
    write_table_csv(frame, filepath)


def write_table_csv(frame: pd.DataFrame, filepath) -> None:
    Path(filepath).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(filepath, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {filepath}")
