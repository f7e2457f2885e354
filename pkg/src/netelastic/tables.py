"""CSV ingestion and the output table schemas."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .aft import SurvivalRecord
from .errors import ParseError, SchemaError

logger = logging.getLogger(__name__)

CLINICAL_COLUMNS = ("patient_id", "survival_months", "censored", "pack_years", "stage")
EDGE_COLUMNS = ("source", "target", "weight")
COEFFICIENT_ID = "node_id"
PATH_COLUMNS = ("alpha", "lambda", "node_id", "coefficient", "value")
SCORE_COLUMNS = ("alpha", "lambda", "cv_score", "K", "aic")
PREDICTION_COLUMNS = ("patient_id", "predicted", "actual")
CLUSTER_COLUMNS = ("node_id", "cluster")
ENRICHMENT_COLUMNS = ("cluster", "stage", "count", "p_value", "significant")


@dataclass
class Cohort:
    """Joined expression + clinical data, one row per patient, sorted by id.

    ``event`` is 1 where death was observed. ``stage`` is NaN when unknown.
    """

    ids: list
    genes: list
    expression: np.ndarray
    time: np.ndarray
    event: np.ndarray
    exposure: np.ndarray
    stage: np.ndarray
    dropped: int = 0

    def __len__(self):
        return len(self.ids)

    def subset(self, rows) -> "Cohort":
        rows = list(rows)
        return Cohort([self.ids[r] for r in rows], self.genes, self.expression[rows], self.time[rows],
                      self.event[rows], self.exposure[rows], self.stage[rows])

    def to_records(self) -> list[SurvivalRecord]:
        return [
            SurvivalRecord(self.time[r], int(self.event[r]), self.expression[r], self.exposure[r],
                           None if math.isnan(self.stage[r]) else int(self.stage[r]), self.ids[r])
            for r in range(len(self))
        ]

    def stages(self) -> list:
        return [None if math.isnan(s) else int(s) for s in self.stage]


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    return header, rows


def _require(header, columns, path):
    for col in columns:
        if col not in header:
            raise SchemaError(f"{path}: missing required column {col!r}")


def _number(cell, path, line, column):
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"{path}: row {line}, column {column!r}: non-numeric value {cell!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"{path}: row {line}, column {column!r}: non-finite value {cell!r}")
    return v


def ingest(expression_path, clinical_path) -> Cohort:
    """Inner-join expression and clinical tables on ``patient_id``.

    Clinical rows with an empty survival time or exposure are dropped and
    counted, as are patients present in only one file.
    """
    eh, erows = _read_rows(expression_path)
    _require(eh, ("patient_id",), expression_path)
    if len(eh) < 2:
        raise SchemaError(f"{expression_path}: no gene columns")
    pid = eh.index("patient_id")
    genes = [h for k, h in enumerate(eh) if k != pid]
    expr = {}
    for line, row in enumerate(erows, start=2):
        if len(row) != len(eh):
            raise ParseError(f"{expression_path}: row {line} has {len(row)} cells, expected {len(eh)}")
        values = [_number(row[k].strip(), expression_path, line, eh[k]) for k in range(len(eh)) if k != pid]
        expr[row[pid].strip()] = values

    ch, crows = _read_rows(clinical_path)
    _require(ch, CLINICAL_COLUMNS, clinical_path)
    col = {c: ch.index(c) for c in CLINICAL_COLUMNS}
    clin = {}
    dropped = 0
    for line, row in enumerate(crows, start=2):
        cells = {c: (row[k].strip() if k < len(row) else "") for c, k in col.items()}
        if cells["survival_months"] == "" or cells["pack_years"] == "":
            dropped += 1
            continue
        event = _number(cells["censored"], clinical_path, line, "censored")
        if event not in (0.0, 1.0):
            raise ParseError(f"{clinical_path}: row {line}, column 'censored': expected 0 or 1")
        stage = math.nan if cells["stage"] == "" else _number(cells["stage"], clinical_path, line, "stage")
        clin[cells["patient_id"]] = (
            _number(cells["survival_months"], clinical_path, line, "survival_months"),
            int(event),
            _number(cells["pack_years"], clinical_path, line, "pack_years"),
            stage,
        )

    ids = sorted(set(expr) & set(clin))
    dropped += len(set(clin) - set(expr))
    unmatched = len(set(expr) - set(clin))
    if dropped or unmatched:
        logger.info("ingest: dropped %d clinical row(s); %d expression row(s) unmatched", dropped, unmatched)
    if not ids:
        raise SchemaError("no patients present in both expression and clinical files")
    cl = np.array([clin[i] for i in ids], dtype=float)
    return Cohort(
        ids=ids,
        genes=genes,
        expression=np.array([expr[i] for i in ids], dtype=float),
        time=cl[:, 0],
        event=cl[:, 1].astype(int),
        exposure=cl[:, 2],
        stage=cl[:, 3],
        dropped=dropped,
    )


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def write_table(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_table(path, columns) -> list[dict]:
    """Read a CSV written by :func:`write_table`, checking its header."""
    header, rows = _read_rows(path)
    _require(header, columns, path)
    return [dict(zip(header, row)) for row in rows]


def read_edges(path) -> list[tuple[str, str, float]]:
    out = []
    for line, row in enumerate(read_table(path, EDGE_COLUMNS), start=2):
        out.append((row["source"], row["target"], _number(row["weight"], path, line, "weight")))
    return out


def read_clusters(path) -> dict:
    return {r["node_id"]: int(r["cluster"]) for r in read_table(path, CLUSTER_COLUMNS)}


def write_cohort(cohort_dir, ids, genes, expression, time, event, exposure, stage) -> tuple[Path, Path]:
    """Write expression.csv and clinical.csv in the ingestible layout."""
    cohort_dir = Path(cohort_dir)
    ex = write_table(cohort_dir / "expression.csv", ["patient_id", *genes],
                     ([pid, *row] for pid, row in zip(ids, expression)))
    cl = write_table(cohort_dir / "clinical.csv", CLINICAL_COLUMNS,
                     zip(ids, time, event, exposure, stage))
    return ex, cl
