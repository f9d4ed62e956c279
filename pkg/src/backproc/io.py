"""CSV ingestion and export.

On-disk contract: subjects.csv with columns id, w, x, delta (delta in {0,1})
and events.csv with columns id, time, mark. Forward time is the on-disk
convention; backward time is always derived. UTF-8, header row required,
'.' decimal separator.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .model import Cohort, ProcessEvent, SubjectRecord, validate_cohort

__all__ = ["IngestError", "ingest", "write_cohort", "write_rows"]


class IngestError(ValueError):
    """Malformed input file; message names the file and line."""


def _parse_float(raw: str, path, line: int, col: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise IngestError(f"{path}, line {line}: column {col!r} is not a number: {raw!r}") from None


def ingest(subjects_path, events_path) -> Cohort:
    """Read and join the two CSV inputs into a validated cohort.

    Events referencing unknown subject ids are rejected with the offending
    line number; validation errors from the data model propagate.
    """
    subjects_path = Path(subjects_path)
    events_path = Path(events_path)

    raw: dict[str, dict] = {}
    order: list[str] = []
    with open(subjects_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != [
            "id",
            "w",
            "x",
            "delta",
        ]:
            raise IngestError(
                f"{subjects_path}: header must be exactly 'id,w,x,delta', "
                f"got {reader.fieldnames}"
            )
        for line, row in enumerate(reader, start=2):
            sid = row["id"]
            if sid is None or sid == "":
                raise IngestError(f"{subjects_path}, line {line}: empty id")
            if row["delta"] not in ("0", "1"):
                raise IngestError(
                    f"{subjects_path}, line {line}: delta must be 0 or 1, got {row['delta']!r}"
                )
            if sid in raw:
                raise IngestError(f"{subjects_path}, line {line}: duplicate subject id {sid!r}")
            raw[sid] = {
                "w": _parse_float(row["w"], subjects_path, line, "w"),
                "x": _parse_float(row["x"], subjects_path, line, "x"),
                "delta": int(row["delta"]),
                "events": [],
            }
            order.append(sid)

    with open(events_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != [
            "id",
            "time",
            "mark",
        ]:
            raise IngestError(
                f"{events_path}: header must be exactly 'id,time,mark', got {reader.fieldnames}"
            )
        for line, row in enumerate(reader, start=2):
            sid = row["id"]
            if sid not in raw:
                raise IngestError(f"{events_path}, line {line}: unknown subject id {sid!r}")
            raw[sid]["events"].append(
                ProcessEvent(
                    time=_parse_float(row["time"], events_path, line, "time"),
                    mark=_parse_float(row["mark"], events_path, line, "mark"),
                )
            )

    records = [
        SubjectRecord(
            id=sid,
            w=raw[sid]["w"],
            x=raw[sid]["x"],
            delta=raw[sid]["delta"],
            events=tuple(sorted(raw[sid]["events"], key=lambda ev: ev.time)),
        )
        for sid in order
    ]
    return validate_cohort(records)


def write_cohort(cohort: Cohort, subjects_path, events_path) -> None:
    """Serialize a cohort back to the two-CSV on-disk form (round-trips with
    :func:`ingest` up to event ordering within a subject)."""
    with open(subjects_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "w", "x", "delta"])
        for s in cohort.subjects:
            writer.writerow([s.id, repr(s.w), repr(s.x), s.delta])
    with open(events_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "time", "mark"])
        for s in cohort.subjects:
            for ev in s.events:
                writer.writerow([s.id, repr(ev.time), repr(ev.mark)])


def write_rows(path, header: list[str], rows) -> None:
    """Write a list of row dicts as CSV with a fixed column order; floats are
    written with repr so output is byte-stable across runs."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [repr(row[c]) if isinstance(row[c], float) else row[c] for c in header]
            )
