"""Report assembly: the per-(R*, t) probability rows and the report.json bundle."""
import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Annotated

import pandas as pd
from jsonschema import Draft202012Validator
from pydantic import BaseModel, Field, model_validator

from calibration import FirmModel
from diffusion_core import DensityCurve, first_passage_cdf
from errors import DataValidationError, ModelInputError
from io_utils import dumps_json
from last_passage import AlarmQuery, lp_atom, lp_interval, occupancy_prob, q_joint_prob
from simulation import default_probability_analytic

logger = logging.getLogger(__name__)

REPORT_SCHEMA_FILE = Path(__file__).resolve().parent / "schemas" / "report.schema.json"

PROBABILITY_FIELDS = frozenset({
    "lp_within", "lp_atom", "lp_interval", "first_passage_cdf", "default_probability_analytic",
    "default_probability", "q_joint_prob", "occupancy_prob", "insolvency_prob", "time_above_frac",
})

Probability = Annotated[float, Field(ge=0.0, le=1.0)]


# --- Rows ---
class AnalysisRow(BaseModel):
    """One (R*, t) row: last-passage, first-passage and occupancy probabilities."""

    rstar: float
    t: float
    alpha: float
    lp_within: Probability
    lp_atom: Probability
    lp_interval: Probability          # continuous part over [0, t]
    first_passage_cdf: Probability
    default_probability_analytic: Probability
    q_joint_prob: Probability
    occupancy_prob: Probability


def analysis_row(model: FirmModel, rstar: float, t: float) -> AnalysisRow:
    rstar, t = float(rstar), float(t)
    if not rstar > 1.0:
        raise ModelInputError(f"R* must exceed 1, got {rstar}")
    if not t > 0.0:
        raise ModelInputError(f"t must be positive, got {t}")
    spec = model.spec
    query = AlarmQuery(alpha=model.alpha_of_rstar(rstar), spec=spec)
    atom = lp_atom(query)
    interval = lp_interval(0.0, t, query)
    return AnalysisRow(rstar=rstar, t=t, alpha=query.alpha,
                       lp_within=min(1.0, atom + interval),
                       lp_atom=atom,
                       lp_interval=interval,
                       first_passage_cdf=first_passage_cdf(t, spec),
                       default_probability_analytic=default_probability_analytic(model),
                       q_joint_prob=q_joint_prob(t, query),
                       occupancy_prob=occupancy_prob(t, query))


def analysis_table(model: FirmModel, rstars, ts) -> list[AnalysisRow]:
    rows = [analysis_row(model, rstar, t) for rstar in rstars for t in ts]
    logger.info("Computed %d analysis rows for %s", len(rows), model.label or "model")
    return rows


def rows_frame(rows) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() if isinstance(row, BaseModel) else dict(row) for row in rows])


# --- Bundle ---
class ReportMetadata(BaseModel):
    firm_id: str = ""
    reference_date: str | None = None
    parameters: dict[str, float | None]


class ReportBundle(BaseModel):
    metadata: ReportMetadata
    tables: dict[str, list[dict[str, float | int | str | None]]] = {}
    curves: dict[str, DensityCurve] = {}

    @model_validator(mode="after")
    def _probabilities_in_range(self):
        for name, rows in self.tables.items():
            for i, row in enumerate(rows):
                for key, value in row.items():
                    if key in PROBABILITY_FIELDS and value is not None and not 0.0 <= value <= 1.0:
                        raise ValueError(f"tables.{name}[{i}].{key} = {value} is not a probability")
        for name, curve in self.curves.items():
            if curve.kind == "cdf" and any(v > 1.0 for v in curve.values):
                raise ValueError(f"curves.{name} is a distribution function above 1")
        return self


def model_parameters(model: FirmModel) -> dict[str, float | None]:
    spec = model.spec
    return {"nu": model.nu, "sigma": model.sigma, "r": model.r, "A0": model.A0, "D0": model.D0,
            "R0": model.R0, "mu": spec.mu, "c": spec.c, "y": spec.y,
            "se_nu": model.se_nu, "se_sigma": model.se_sigma}


def build_report(model: FirmModel, tables: dict | None = None, curves: dict | None = None,
                 reference_date: str | None = None) -> ReportBundle:
    """ReportBundle echoing the model; table rows may be pydantic rows or plain dicts."""
    normalized = {
        name: [row.model_dump() if isinstance(row, BaseModel) else dict(row) for row in rows]
        for name, rows in (tables or {}).items()
    }
    try:
        return ReportBundle(metadata=ReportMetadata(firm_id=model.label,
                                                    reference_date=reference_date or model.label or None,
                                                    parameters=model_parameters(model)),
                            tables=normalized, curves=curves or {})
    except ValueError as e:
        raise ModelInputError(str(e)) from e


# --- Schema ---
@lru_cache(maxsize=1)
def _report_validator() -> Draft202012Validator:
    with open(REPORT_SCHEMA_FILE, 'r', encoding='utf-8') as f:
        schema = json.load(f)
    Draft202012Validator.check_schema(schema)
    return Draft202012Validator(schema)


def report_payload(bundle: ReportBundle) -> dict:
    """The JSON document for a bundle, validated against the published schema."""
    payload = json.loads(dumps_json(bundle))
    validate_report(payload)
    return payload


def validate_report(payload: dict) -> None:
    errors = sorted(_report_validator().iter_errors(payload), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        first = errors[0]
        location = "/".join(str(p) for p in first.absolute_path) or None
        raise DataValidationError(first.message, path=REPORT_SCHEMA_FILE.name, column=location)
