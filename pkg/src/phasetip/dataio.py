"""Dataset file ingestion and emission.

One CSV schema, fixed header:

    subject_id,arm,pfs_months,event,mono_start_months,cutoff_months,stratum

`arm` is E or C; an empty `mono_start_months` means the subject never
entered the monotherapy phase; `stratum` is an optional small integer.
Times are decimal months. Floats are written with repr so that a write
followed by a read reproduces the records exactly.
"""

from __future__ import annotations

import csv

from .errors import DataError
from .records import Arm, SubjectRecord

__all__ = ["HEADER", "read_dataset", "write_dataset"]

HEADER = [
    "subject_id", "arm", "pfs_months", "event",
    "mono_start_months", "cutoff_months", "stratum",
]


def _parse_row(row, lineno) -> SubjectRecord:
    if len(row) != len(HEADER):
        raise DataError(f"row {lineno}: expected {len(HEADER)} fields, got {len(row)}")
    sid, arm_code, pfs, event, mono, cutoff, stratum = (v.strip() for v in row)
    if not sid:
        raise DataError(f"row {lineno}: subject_id is empty")

    def number(value, name):
        try:
            return float(value)
        except ValueError:
            raise DataError(f"row {lineno}: {name} is not a number: {value!r}") from None

    if event not in ("0", "1"):
        raise DataError(f"row {lineno}: event must be 0 or 1, got {event!r}")
    try:
        arm = Arm.from_code(arm_code)
        return SubjectRecord(
            subject_id=sid,
            arm=arm,
            s=number(pfs, "pfs_months"),
            delta=int(event),
            cutoff=number(cutoff, "cutoff_months"),
            mono_start=number(mono, "mono_start_months") if mono else None,
            stratum=int(number(stratum, "stratum")) if stratum else None,
        )
    except DataError as err:
        msg = str(err)
        if not msg.startswith(f"row {lineno}"):
            msg = f"row {lineno}: {msg}"
        raise DataError(msg) from None


def read_dataset(path, strict: bool = True) -> list[SubjectRecord]:
    """Read and validate a dataset file.

    Strict mode aborts on the first bad row. Lenient mode reads the whole
    file and reports every bad row at once (the error's `diagnostics` list
    carries one message per offending row). Both modes reject bad data;
    an empty body with a valid header yields an empty dataset.
    """
    try:
        handle = open(path, newline="")
    except OSError as err:
        raise DataError(f"cannot read dataset: {err}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file: missing header") from None
        if [h.strip() for h in header] != HEADER:
            raise DataError(
                f"header mismatch: expected {','.join(HEADER)!r}, got {','.join(header)!r}"
            )
        records = []
        problems = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                records.append(_parse_row(row, lineno))
            except DataError as err:
                if strict:
                    raise
                problems.append(str(err))
        if problems:
            raise DataError(f"{len(problems)} invalid row(s)", diagnostics=problems)
        return records


def write_dataset(records, path) -> None:
    try:
        handle = open(path, "w", newline="")
    except OSError as err:
        raise DataError(f"cannot write dataset: {err}") from None
    with handle:
        writer = csv.writer(handle)
        writer.writerow(HEADER)
        for r in records:
            writer.writerow([
                r.subject_id,
                r.arm.code,
                repr(float(r.s)),
                r.delta,
                "" if r.mono_start is None else repr(float(r.mono_start)),
                repr(float(r.cutoff)),
                "" if r.stratum is None else r.stratum,
            ])
