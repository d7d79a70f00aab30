"""Loading note corpora (CSV / JSONL) and saving generated dialogues."""

from __future__ import annotations

import csv
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import DataValidationError, DuplicateId, EmptyNote, MalformedLine, MissingColumn

if TYPE_CHECKING:
    from .pipeline import GenerationTrace


@dataclass(frozen=True)
class ClinicalNote:
    id: str
    text: str
    patient_id: str | None = None
    visit_seq: int | None = None
    reference_dialogue: str | None = None


@dataclass(frozen=True)
class Corpus:
    notes: tuple[ClinicalNote, ...]

    @property
    def has_references(self) -> bool:
        # vacuously true for an empty corpus; check ``is_empty`` too
        return all(n.reference_dialogue is not None for n in self.notes)

    @property
    def is_empty(self) -> bool:
        return not self.notes

    def __len__(self) -> int:
        return len(self.notes)

    def __iter__(self):
        return iter(self.notes)

    def by_id(self) -> dict[str, ClinicalNote]:
        return {n.id: n for n in self.notes}


@dataclass(frozen=True)
class ColumnMap:
    """CSV header names. Defaults follow the MTS-Dialogue release.

    ``id`` and ``note`` must exist; the optional columns are used when present.
    """

    id: str = "ID"
    note: str = "section_text"
    dialogue: str | None = "dialogue"
    patient: str | None = None
    visit: str | None = None


def _build_corpus(records: Iterable[tuple[int, dict]]) -> Corpus:
    notes: list[ClinicalNote] = []
    seen: set[str] = set()
    for row, rec in records:
        note_id = str(rec["id"]).strip()
        if not note_id:
            raise DataValidationError(f"row {row}: empty id")
        if note_id in seen:
            raise DuplicateId(row, note_id)
        text = rec.get("text")
        if text is None or not str(text).strip():
            raise EmptyNote(row)
        patient = rec.get("patient_id")
        patient = str(patient).strip() if patient not in (None, "") else None
        visit = rec.get("visit_seq")
        if visit in (None, ""):
            visit = None
        else:
            try:
                visit = int(visit)
            except (TypeError, ValueError):
                raise DataValidationError(f"row {row}: visit_seq {visit!r} is not an integer") from None
            if visit < 1:
                raise DataValidationError(f"row {row}: visit_seq must be positive")
        if (patient is None) != (visit is None):
            raise DataValidationError(f"row {row}: patient_id and visit_seq must be given together")
        ref = rec.get("reference_dialogue")
        ref = str(ref) if ref not in (None, "") else None
        seen.add(note_id)
        notes.append(ClinicalNote(note_id, str(text), patient, visit, ref))
    return Corpus(tuple(notes))


def load_csv(path: str | Path, column_map: ColumnMap | None = None) -> Corpus:
    cm = column_map or ColumnMap()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (cm.id, cm.note):
            if col not in header:
                raise MissingColumn(col, str(path))
        optional = {
            "reference_dialogue": cm.dialogue,
            "patient_id": cm.patient,
            "visit_seq": cm.visit,
        }
        optional = {k: v for k, v in optional.items() if v and v in header}

        def records():
            # row numbers count the header as row 1, as a spreadsheet would
            for row, raw in enumerate(reader, start=2):
                rec = {"id": raw[cm.id], "text": raw[cm.note]}
                rec.update({k: raw[v] for k, v in optional.items()})
                yield row, rec

        return _build_corpus(records())


_JSONL_FIELDS = ("id", "text", "patient_id", "visit_seq", "reference_dialogue")


def load_jsonl(path: str | Path) -> Corpus:
    def records():
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedLine(n, f"invalid JSON ({exc.msg})") from None
                if not isinstance(obj, dict):
                    raise MalformedLine(n, "expected a JSON object")
                for key in ("id", "text"):
                    if key not in obj:
                        raise MalformedLine(n, f"missing field {key!r}")
                yield n, {k: obj.get(k) for k in _JSONL_FIELDS}

    return _build_corpus(records())


def load_corpus(path: str | Path, fmt: str | None = None, column_map: ColumnMap | None = None) -> Corpus:
    fmt = fmt or ("jsonl" if str(path).endswith((".jsonl", ".json")) else "csv")
    if fmt == "csv":
        return load_csv(path, column_map)
    if fmt == "jsonl":
        return load_jsonl(path)
    raise ValueError(f"unknown corpus format {fmt!r}")


def group_by_patient(notes: Sequence[ClinicalNote]) -> list[list[ClinicalNote]]:
    """Visit chains ordered by ``visit_seq``; notes without a patient form singleton groups.

    Groups appear in order of their first note in ``notes``.
    """
    groups: dict[str, list[ClinicalNote]] = {}
    order: list[str] = []
    for n in notes:
        key = f"patient:{n.patient_id}" if n.patient_id is not None else f"note:{n.id}"
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(n)
    return [sorted(groups[k], key=lambda n: n.visit_seq or 0) for k in order]


def save_dialogues(traces: Sequence[GenerationTrace], path: str | Path) -> int:
    """Write the selected dialogue of every successful trace. Returns how many failed traces were omitted."""
    omitted = 0
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            best = t.selected_attempt
            if t.failed or best is None:
                omitted += 1
                continue
            rec = {
                "note_id": t.note_id,
                "dialogue_text": best.dialogue.raw_text,
                "turns": [turn.to_dict() for turn in best.dialogue.turns],
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return omitted


def load_dialogues(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out[obj["note_id"]] = obj["dialogue_text"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise MalformedLine(n, "expected {note_id, dialogue_text}") from None
    return out
