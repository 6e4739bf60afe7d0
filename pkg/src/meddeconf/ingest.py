"""Reading and writing cohorts as CSV files.

File layout (UTF-8, header row, comma-delimited by default):

* exposures:   ``patient_id,<label1>,...,<labelD>``
* outcomes:    ``patient_id,outcome``
* truth:       ``label,true_effect`` (optional)
* confounders: ``patient_id,confounder_1,...,confounder_K`` (optional)

Binary exposure matrices are written as integer 0/1 cells; real values use
``repr`` so they reload bit-for-bit.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Cohort, ExposureMatrix, validate_cohort
from .exceptions import IngestError

__all__ = ["CohortFiles", "load_cohort", "save_cohort", "filter_rare_causes"]

log = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class CohortFiles:
    exposures_path: Path
    outcomes_path: Path
    truth_path: Optional[Path] = None
    confounders_path: Optional[Path] = None
    delimiter: str = ","

    @classmethod
    def in_directory(cls, directory, delimiter=","):
        """Conventional file names inside ``directory``; optional files only if present."""
        d = Path(directory)
        truth = d / "truth.csv"
        conf = d / "confounders.csv"
        return cls(
            d / "exposures.csv",
            d / "outcomes.csv",
            truth if truth.exists() else None,
            conf if conf.exists() else None,
            delimiter,
        )


def _read_rows(path, delimiter, expected_header=None):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read file: {exc}", path=path) from exc
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("file is empty; a header row is required", path=path) from None
        header = [h.strip() for h in header]
        if expected_header is not None and header[: len(expected_header)] != expected_header:
            raise IngestError(f"expected header starting with {expected_header}, got {header}", path=path, line=1)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise IngestError(f"expected {len(header)} fields, got {len(row)}", path=path, line=line_no)
            rows.append((line_no, [cell.strip() for cell in row]))
    return header, rows


def _parse_float(cell, path, line, column):
    try:
        value = float(cell)
    except ValueError:
        raise IngestError(f"non-numeric value {cell!r}", path=path, line=line, column=column) from None
    if not math.isfinite(value):
        raise IngestError(f"non-finite value {cell!r}", path=path, line=line, column=column)
    return value


def _index_by_patient(rows, path):
    seen = {}
    for line_no, row in rows:
        pid = row[0]
        if not pid:
            raise IngestError("empty patient_id", path=path, line=line_no, column="patient_id")
        if pid in seen:
            raise IngestError(f"duplicate patient_id {pid!r} (first on line {seen[pid][0]})", path=path, line=line_no)
        seen[pid] = (line_no, row)
    return seen


def load_cohort(files: CohortFiles, drop_empty_causes: bool = True) -> Cohort:
    """Load a cohort, joining exposures and outcomes on ``patient_id``.

    Patients without an outcome (absent from the outcomes file or with a
    blank/NA cell) are dropped with a warning. Causes nobody received are
    dropped too unless ``drop_empty_causes`` is False.

    Raises
    ------
    IngestError
        Malformed or non-numeric cells (with line and column), duplicate
        patient ids, or an empty cohort after joining.
    """
    delim = files.delimiter
    header, exp_rows = _read_rows(files.exposures_path, delim, ["patient_id"])
    labels = header[1:]
    if len(labels) < 1:
        raise IngestError("exposures file has no cause columns", path=files.exposures_path, line=1)
    if len(set(labels)) != len(labels):
        raise IngestError("duplicate cause labels in header", path=files.exposures_path, line=1)
    exposures = _index_by_patient(exp_rows, files.exposures_path)

    _, out_rows = _read_rows(files.outcomes_path, delim, ["patient_id", "outcome"])
    outcomes = _index_by_patient(out_rows, files.outcomes_path)

    ids, a_rows, y = [], [], []
    binary = True
    n_missing = 0
    for pid, (line_no, row) in exposures.items():
        values = []
        for col, cell in zip(labels, row[1:]):
            v = _parse_float(cell, files.exposures_path, line_no, col)
            if binary and not (cell in ("0", "1")):
                binary = False
            values.append(v)
        if pid not in outcomes or outcomes[pid][1][1].lower() in MISSING:
            n_missing += 1
            continue
        o_line, o_row = outcomes[pid]
        y.append(_parse_float(o_row[1], files.outcomes_path, o_line, "outcome"))
        ids.append(pid)
        a_rows.append(values)
    if n_missing:
        log.warning("dropped %d patient(s) without an outcome", n_missing)
        warnings.warn(f"dropped {n_missing} patient(s) without an outcome", stacklevel=2)
    extra = len(set(outcomes) - set(exposures))
    if extra:
        log.info("ignored %d outcome row(s) with no exposure record", extra)
    if not ids:
        raise IngestError("cohort is empty after joining exposures and outcomes", path=files.exposures_path)

    a = np.array(a_rows, dtype=float).reshape(len(ids), len(labels))
    effects = None
    if files.truth_path is not None:
        effects = _load_truth(files.truth_path, delim, labels)
    confounders = None
    if files.confounders_path is not None:
        confounders = _load_confounders(files.confounders_path, delim, ids)

    cohort = Cohort(ExposureMatrix(a, binary=binary), np.array(y), labels, confounders, effects)
    if drop_empty_causes:
        keep = np.flatnonzero(np.any(a != 0, axis=0))
        if keep.size < a.shape[1]:
            dropped = [labels[j] for j in range(a.shape[1]) if j not in set(keep)]
            log.warning("dropped %d cause(s) with no exposed patients: %s", len(dropped), dropped)
            cohort = cohort.select_causes(keep)
    return validate_cohort(cohort)


def _load_truth(path, delim, labels):
    _, rows = _read_rows(path, delim, ["label", "true_effect"])
    table = {}
    for line_no, row in rows:
        if row[0] in table:
            raise IngestError(f"duplicate label {row[0]!r}", path=path, line=line_no)
        table[row[0]] = _parse_float(row[1], path, line_no, "true_effect")
    missing = [lab for lab in labels if lab not in table]
    if missing:
        raise IngestError(f"no true effect for causes {missing}", path=path)
    return np.array([table[lab] for lab in labels])


def _load_confounders(path, delim, ids):
    header, rows = _read_rows(path, delim, ["patient_id"])
    table = _index_by_patient(rows, path)
    out = []
    for pid in ids:
        if pid not in table:
            raise IngestError(f"no confounder row for patient {pid!r}", path=path)
        line_no, row = table[pid]
        out.append([_parse_float(c, path, line_no, h) for h, c in zip(header[1:], row[1:])])
    return np.array(out, dtype=float).reshape(len(ids), len(header) - 1)


def _fmt(x):
    return repr(float(x))


def save_cohort(cohort: Cohort, directory, patient_ids=None, delimiter=",") -> CohortFiles:
    """Write a cohort under ``directory`` using the conventional file names."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    n = cohort.n_patients
    if patient_ids is None:
        width = len(str(n))
        patient_ids = [f"p{i + 1:0{width}d}" for i in range(n)]
    a = cohort.exposures.values
    cell = (lambda v: str(int(v))) if cohort.exposures.binary else _fmt

    files = CohortFiles(
        d / "exposures.csv",
        d / "outcomes.csv",
        d / "truth.csv" if cohort.true_effects is not None else None,
        d / "confounders.csv" if cohort.true_confounders is not None else None,
        delimiter,
    )
    with open(files.exposures_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["patient_id", *cohort.cause_labels])
        for pid, row in zip(patient_ids, a):
            w.writerow([pid, *(cell(v) for v in row)])
    with open(files.outcomes_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["patient_id", "outcome"])
        for pid, v in zip(patient_ids, cohort.outcomes):
            w.writerow([pid, _fmt(v)])
    if files.truth_path is not None:
        with open(files.truth_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
            w.writerow(["label", "true_effect"])
            for lab, v in zip(cohort.cause_labels, cohort.true_effects):
                w.writerow([lab, _fmt(v)])
    if files.confounders_path is not None:
        conf = cohort.true_confounders
        with open(files.confounders_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
            w.writerow(["patient_id", *(f"confounder_{k + 1}" for k in range(conf.shape[1]))])
            for pid, row in zip(patient_ids, conf):
                w.writerow([pid, *(_fmt(v) for v in row)])
    return files


def filter_rare_causes(cohort: Cohort, quantile: float = 0.05) -> Cohort:
    """Drop the ``floor(quantile * D)`` least frequently prescribed causes.

    Frequency is the number of patients with a nonzero exposure. Ties are
    broken by label order, so among equally rare causes the lexicographically
    first ones go.
    """
    if not 0.0 <= quantile < 1.0:
        raise ValueError(f"quantile must lie in [0, 1), got {quantile}")
    d = cohort.n_causes
    n_drop = int(math.floor(quantile * d + 1e-12))
    if n_drop == 0:
        return cohort
    freq = np.count_nonzero(cohort.exposures.values, axis=0)
    order = sorted(range(d), key=lambda j: (freq[j], cohort.cause_labels[j]))
    dropped = set(order[:n_drop])
    cutoff = freq[order[n_drop - 1]]
    if n_drop < d and freq[order[n_drop]] == cutoff:
        log.info("frequency tie at %d; dropping by label order", cutoff)
    log.info("dropping %d rare cause(s): %s", n_drop, [cohort.cause_labels[j] for j in sorted(dropped)])
    return cohort.select_causes([j for j in range(d) if j not in dropped])
