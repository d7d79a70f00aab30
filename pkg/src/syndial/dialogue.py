"""Speaker-tagged dialogue parsing."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

ROLES = ("patient", "doctor", "other")

_ROLE_WORDS = {"doctor": "doctor", "physician": "doctor", "patient": "patient"}

# optional markdown/bullet markup, role word, colon, optional closing markup
_LABEL_RE = re.compile(
    r"^(?P<label>\s*[*_#>\-\s]*(?P<role>doctor|physician|patient)\s*[*_]*\s*:[*_]*)(?P<rest>.*)$",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class Turn:
    role: str
    utterance: str
    label: str = ""

    def to_dict(self) -> dict:
        return {"role": self.role, "label": self.label, "utterance": self.utterance}

    @classmethod
    def from_dict(cls, d: dict) -> Turn:
        return cls(d["role"], d["utterance"], d.get("label", ""))


@dataclass(frozen=True)
class Dialogue:
    turns: tuple[Turn, ...]
    raw_text: str
    labelled: bool = field(default=True)

    def metric_text(self, strip_labels: bool = True) -> str:
        """Text fed to the ROUGE metrics: utterances joined with single spaces."""
        if strip_labels:
            parts = [t.utterance for t in self.turns]
        else:
            parts = [f"{t.label} {t.utterance}" if t.label else t.utterance for t in self.turns]
        return " ".join(" ".join(p.split()) for p in parts if p.strip())

    def utterances(self, role: str | None = None) -> list[str]:
        return [t.utterance for t in self.turns if role is None or t.role == role]


def parse_dialogue(raw: str) -> Dialogue:
    """Split generated text into speaker turns.

    A line starting with ``Doctor:``, ``Physician:`` or ``Patient:`` (any case,
    optionally wrapped in markdown such as ``**Physician:**``) opens a turn;
    other lines continue the current turn.  Text before the first label, or
    the whole text when no label occurs, becomes an ``other`` turn.

    >>> [t.role for t in parse_dialogue("Doctor: Hello.\\nPatient: Hi.").turns]
    ['doctor', 'patient']
    """
    turns: list[list] = []  # [role, label, lines]
    for line in raw.splitlines():
        m = _LABEL_RE.match(line)
        if m:
            role = _ROLE_WORDS[m.group("role").lower()]
            turns.append([role, m.group("label").strip(), [m.group("rest").strip()]])
        elif line.strip():
            if not turns:
                turns.append(["other", "", []])
            turns[-1][2].append(line.strip())
    labelled = any(role != "other" for role, _, _ in turns)
    if not turns:
        return Dialogue((Turn("other", raw.strip()),), raw, labelled=False)
    return Dialogue(
        tuple(Turn(role, "\n".join(x for x in lines if x), label) for role, label, lines in turns),
        raw,
        labelled=labelled,
    )
