"""Question datasets: cue-word extraction, filtering, splits, statistics.

Binary causal questions are mined from a question corpus with the pattern

    [question word]? [cause/effect] [cue word] [cause/effect]

where the optional question word is an auxiliary (is/can/does/...) and the
cue word is one of 23 causal verbs with their prepositions.  Cue matching is
case-insensitive over lemma-like surface variants (cause/causes/caused/
causing); "from"-cues (result from, stem from, derive from) invert the
cause/effect roles.  Spans containing an excluded POS tag (CC, IN, TO, WDT,
WP, WRB) are dropped; when the corpus carries no tags, a stop-word list
approximating those tags is used instead.

All transforms are stateless and order-preserving over the record stream.

File formats: corpus records are newline-delimited JSON
``{id, question, answer, pos_tags?, split?}``; datasets are tab-separated
``(id, question, cause, effect, label, split)`` with a header row; the
lexicon ships as editable plain-text lists.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence

from .graph import CausalGraph, link

_INVERTING_PREPOSITION = "from"

# Rough surface approximation of the excluded POS tags, applied to spans
# only when the corpus provides no tags.
STOPWORD_FALLBACK = frozenset(
    {
        "and", "or", "but", "nor",  # CC
        "of", "in", "on", "at", "by", "with", "from", "for", "as", "about",
        "through", "during", "after", "before", "if", "because", "while",
        "than", "whether", "into", "over", "under",  # IN
        "to",  # TO
        "which", "that",  # WDT
        "who", "whom", "what",  # WP
        "when", "where", "why", "how",  # WRB
    }
)


@dataclass(frozen=True)
class QAExample:
    id: str
    question_text: str
    cause_phrase: str
    effect_phrase: str
    label: str  # "yes" or "no"
    split: str  # "train", "validation", or "test"

    def __post_init__(self):
        if self.label not in ("yes", "no"):
            raise ValueError(f"label must be yes/no, got {self.label!r}")
        if not self.cause_phrase or not self.effect_phrase:
            raise ValueError("cause and effect phrases must be non-empty")


@dataclass(frozen=True)
class CueWord:
    words: tuple[str, ...]  # verb phrase tokens, e.g. ("give", "rise")
    preposition: Optional[str]  # required trailing preposition, if any
    raw: str  # the line as shipped, for round-tripping

    @property
    def inverts(self) -> bool:
        return self.preposition == _INVERTING_PREPOSITION

    def match_length(self) -> int:
        return len(self.words) + (1 if self.preposition else 0)


@dataclass(frozen=True)
class CueLexicon:
    cue_words: tuple[CueWord, ...]
    question_words: tuple[str, ...]
    excluded_pos: frozenset[str]

    @classmethod
    def from_lines(
        cls,
        cue_lines: Iterable[str],
        question_lines: Iterable[str],
        pos_lines: Iterable[str],
    ) -> "CueLexicon":
        cues = []
        for raw in cue_lines:
            raw = raw.strip()
            if not raw:
                continue
            m = re.fullmatch(r"([a-z ]+?)(?:\s*\(([a-z]+)\))?", raw)
            if m is None:
                raise ValueError(f"unparseable cue word line: {raw!r}")
            cues.append(
                CueWord(words=tuple(m.group(1).split()), preposition=m.group(2), raw=raw)
            )
        questions = tuple(w.strip() for w in question_lines if w.strip())
        pos = frozenset(p.strip() for p in pos_lines if p.strip())
        return cls(cue_words=tuple(cues), question_words=questions, excluded_pos=pos)

    @classmethod
    def from_files(cls, cue_path, question_path, pos_path) -> "CueLexicon":
        def read(path):
            with open(path, "r", encoding="utf-8") as fh:
                return fh.readlines()

        return cls.from_lines(read(cue_path), read(question_path), read(pos_path))

    @classmethod
    def default(cls) -> "CueLexicon":
        pkg = resources.files("causalwalk") / "lexicon"
        return cls.from_lines(
            (pkg / "cue_words.txt").read_text(encoding="utf-8").splitlines(),
            (pkg / "question_words.txt").read_text(encoding="utf-8").splitlines(),
            (pkg / "excluded_pos.txt").read_text(encoding="utf-8").splitlines(),
        )

    def raw_cue_lines(self) -> list[str]:
        return [c.raw for c in self.cue_words]


def _verb_forms(word: str) -> set[str]:
    """Lemma-like inflections: cause -> causes/caused/causing etc."""
    forms = {word, word + "s", word + "es", word + "ed", word + "d", word + "ing"}
    if word.endswith("e"):
        forms.add(word[:-1] + "ing")
    if len(word) >= 2 and word[-1] not in "aeiou" and word[-2] in "aeiou":
        forms.add(word + word[-1] + "ing")  # stem -> stemming
        forms.add(word + word[-1] + "ed")
    return forms


def _match_cue(tokens: Sequence[str], start: int, cue: CueWord) -> int:
    """Token count consumed by the cue at ``start``, or 0 when it does not match."""
    pos = start
    first = tokens[pos] if pos < len(tokens) else None
    if first is None or first not in _verb_forms(cue.words[0]):
        return 0
    pos += 1
    for word in cue.words[1:]:
        if pos >= len(tokens) or tokens[pos] != word:
            return 0
        pos += 1
    if cue.preposition is not None:
        if pos >= len(tokens) or tokens[pos] != cue.preposition:
            return 0
        pos += 1
    return pos - start


@dataclass
class ExtractStats:
    total: int = 0
    extracted: int = 0
    no_pattern: int = 0
    empty_span: int = 0
    excluded_pos: int = 0
    bad_answer: int = 0
    multi_cue: int = 0
    multi_cue_ids: list[str] = field(default_factory=list)


def _normalize_answer(answer: str) -> Optional[str]:
    m = re.match(r"\s*(yes|no)\b", answer, flags=re.IGNORECASE)
    return m.group(1).lower() if m else None


def _span_excluded(
    span_indices: range, tokens: Sequence[str], tags: Optional[Sequence[str]], lexicon: CueLexicon
) -> bool:
    if tags is not None:
        return any(tags[i] in lexicon.excluded_pos for i in span_indices)
    return any(tokens[i] in STOPWORD_FALLBACK for i in span_indices)


def extract_questions(
    records: Iterable[dict],
    lexicon: CueLexicon | None = None,
    default_split: str = "train",
) -> tuple[list[QAExample], ExtractStats]:
    """Mine binary causal questions from a corpus stream.

    Each record needs ``id``, ``question`` and ``answer``; ``pos_tags`` (one
    tag per whitespace token) and ``split`` are optional.  Non-matching
    records are skipped and counted.  When several cue words occur, the
    leftmost (longest at equal position) wins and the record id is flagged.
    """
    lexicon = lexicon or CueLexicon.default()
    cues_longest_first = sorted(lexicon.cue_words, key=CueWord.match_length, reverse=True)
    out: list[QAExample] = []
    stats = ExtractStats()
    for rec in records:
        stats.total += 1
        question = str(rec["question"])
        raw_tokens = question.split()
        tokens = [t.strip("?.,!\"'").lower() for t in raw_tokens]
        tags = rec.get("pos_tags")
        if tags is not None and len(tags) != len(raw_tokens):
            tags = None

        label = _normalize_answer(str(rec.get("answer", "")))
        if label is None:
            stats.bad_answer += 1
            continue

        body_start = 1 if tokens and tokens[0] in lexicon.question_words else 0
        matches: list[tuple[int, int, CueWord]] = []
        for i in range(body_start, len(tokens)):
            for cue in cues_longest_first:
                consumed = _match_cue(tokens, i, cue)
                if consumed:
                    matches.append((i, consumed, cue))
                    break
        if not matches:
            stats.no_pattern += 1
            continue
        if len(matches) > 1:
            stats.multi_cue += 1
            stats.multi_cue_ids.append(str(rec["id"]))
        start, consumed, cue = matches[0]

        left = range(body_start, start)
        right = range(start + consumed, len(tokens))
        left_text = " ".join(tokens[i] for i in left).strip()
        right_text = " ".join(tokens[i] for i in right).strip()
        if not left_text or not right_text:
            stats.empty_span += 1
            continue
        if _span_excluded(left, tokens, tags, lexicon) or _span_excluded(
            right, tokens, tags, lexicon
        ):
            stats.excluded_pos += 1
            continue

        cause, effect = (right_text, left_text) if cue.inverts else (left_text, right_text)
        out.append(
            QAExample(
                id=str(rec["id"]),
                question_text=question,
                cause_phrase=cause,
                effect_phrase=effect,
                label=label,
                split=str(rec.get("split", default_split)),
            )
        )
        stats.extracted += 1
    return out, stats


def filter_training_set(
    graph: CausalGraph, examples: Sequence[QAExample]
) -> list[QAExample]:
    """Effective training set: positive train+validation questions that link."""
    return [
        ex
        for ex in examples
        if ex.split in ("train", "validation")
        and ex.label == "yes"
        and link(graph, ex.cause_phrase) is not None
        and link(graph, ex.effect_phrase) is not None
    ]


@dataclass(frozen=True)
class CorpusStats:
    count: int
    mean_chars: float
    mean_words: float
    label_balance: dict[str, dict[str, int]]  # split -> {yes: n, no: n}
    empty: bool


def corpus_stats(examples: Sequence[QAExample]) -> CorpusStats:
    if not examples:
        return CorpusStats(0, 0.0, 0.0, {}, empty=True)
    chars = [len(ex.question_text) for ex in examples]
    words = [len(ex.question_text.split()) for ex in examples]
    balance: dict[str, dict[str, int]] = {}
    for ex in examples:
        per_split = balance.setdefault(ex.split, {"yes": 0, "no": 0})
        per_split[ex.label] += 1
    return CorpusStats(
        count=len(examples),
        mean_chars=sum(chars) / len(chars),
        mean_words=sum(words) / len(words),
        label_balance=balance,
        empty=False,
    )


DATASET_COLUMNS = ("id", "question", "cause", "effect", "label", "split")


def write_dataset(path, examples: Sequence[QAExample]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(DATASET_COLUMNS)
        for ex in examples:
            writer.writerow(
                [ex.id, ex.question_text, ex.cause_phrase, ex.effect_phrase, ex.label, ex.split]
            )


def read_dataset(path) -> list[QAExample]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(header) != DATASET_COLUMNS:
            raise ValueError(f"{path}: expected header {DATASET_COLUMNS}")
        return [
            QAExample(
                id=row[0],
                question_text=row[1],
                cause_phrase=row[2],
                effect_phrase=row[3],
                label=row[4],
                split=row[5],
            )
            for row in reader
            if row
        ]
