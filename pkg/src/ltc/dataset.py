"""Sample ingestion: JSONL records plus dependency parses, validation, folds.

Parses are ingested, never computed here. They arrive either embedded in
the JSONL record (``parse`` / ``parse_ref`` fields) or in a CoNLL-U
sidecar whose sentence ids match the JSONL ids (refined parses carry an
``.ref`` id suffix).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import taxonomy


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class EntitySpan:
    text: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class Triple:
    person: EntitySpan
    time: EntitySpan
    location: EntitySpan

    def spans(self) -> dict[str, EntitySpan]:
        return {"person": self.person, "time": self.time, "location": self.location}


@dataclass(frozen=True)
class DepToken:
    index: int
    form: str
    pos: str
    head: int          # word index of the head; self-index for the root
    deprel: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class TrajectorySample:
    id: str
    sentence: str
    triple: Triple
    parse: tuple[DepToken, ...]
    refined_sentence: Optional[str] = None
    refined_parse: Optional[tuple[DepToken, ...]] = None
    label: Optional[str] = None
    person_resolved: Optional[str] = None

    def active_view(self, variant: str = "regular") -> "SampleView":
        """Sentence/triple/parse actually used for graph construction.

        For the llm-refined variant the refined pair is used when present;
        entity spans are re-located in the refined sentence by verbatim
        search (first occurrence).
        """
        if variant == "llm-refined" and self.refined_sentence and self.refined_parse:
            triple = relocate_triple(self.refined_sentence, self.triple)
            return SampleView(self.id, self.refined_sentence, triple, self.refined_parse, self.label)
        return SampleView(self.id, self.sentence, self.triple, self.parse, self.label)


@dataclass(frozen=True)
class SampleView:
    """One (sentence, triple, parse) unit as consumed by graph construction."""
    id: str
    sentence: str
    triple: Triple
    parse: tuple[DepToken, ...]
    label: Optional[str] = None


@dataclass
class RejectionReport:
    rejects: list[tuple[int, str, str]] = field(default_factory=list)  # (line, id, reason)

    def add(self, line: int, sample_id: str, reason: str) -> None:
        self.rejects.append((line, sample_id, reason))

    def __len__(self) -> int:
        return len(self.rejects)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps({"line": ln, "id": sid, "reason": why}) + "\n"
            for ln, sid, why in self.rejects
        )


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return [sid for sid, f in self.assignments.items() if f == fold]

    def sizes(self) -> list[int]:
        out = [0] * self.k
        for f in self.assignments.values():
            out[f] += 1
        return out


def relocate_triple(sentence: str, triple: Triple) -> Triple:
    """Re-locate entity texts in another rendering of the sentence.

    Verbatim search, first occurrence. Raises if an entity text is absent
    (the refinement constraints are supposed to guarantee presence).
    """
    spans = {}
    for kind, span in triple.spans().items():
        start = sentence.find(span.text)
        if start < 0:
            raise ValidationError(f"entity {kind} text {span.text!r} not found in sentence")
        spans[kind] = EntitySpan(span.text, start, start + len(span.text))
    return Triple(**spans)


# ---------------------------------------------------------------------------
# CoNLL-U sidecar

def _offsets_from_forms(sentence: str, forms: list[str]) -> list[tuple[int, int]]:
    """Locate each token form left-to-right in the sentence text."""
    offsets = []
    cursor = 0
    for form in forms:
        start = sentence.find(form, cursor)
        if start < 0:
            raise ValidationError(f"token {form!r} not found in sentence after offset {cursor}")
        offsets.append((start, start + len(form)))
        cursor = start + len(form)
    return offsets


def _tokens_from_rows(sentence: str, rows: list[dict]) -> tuple[DepToken, ...]:
    """Build DepTokens from parsed rows, deriving offsets when absent."""
    need_offsets = any(r.get("char_start") is None for r in rows)
    if need_offsets:
        offs = _offsets_from_forms(sentence, [r["form"] for r in rows])
    else:
        offs = [(int(r["char_start"]), int(r["char_end"])) for r in rows]
    tokens = []
    for i, r in enumerate(rows):
        head = int(r["head"])
        tokens.append(DepToken(
            index=i, form=r["form"], pos=r["pos"], head=head,
            deprel=r["deprel"], char_start=offs[i][0], char_end=offs[i][1],
        ))
    return tuple(tokens)


def parse_conllu(path) -> dict[str, list[dict]]:
    """Read a CoNLL-U file into {sent_id: [row dicts]} with raw word rows.

    Multiword-token ranges and empty nodes are rejected; the pipeline
    ingests plain single-word rows only.
    """
    blocks: dict[str, list[dict]] = {}
    sent_id = None
    rows: list[dict] = []

    def flush():
        nonlocal sent_id, rows
        if rows:
            if sent_id is None:
                raise ValidationError("CoNLL-U block without a '# sent_id =' comment")
            if sent_id in blocks:
                raise ValidationError(f"duplicate CoNLL-U sent_id {sent_id!r}")
            blocks[sent_id] = rows
        sent_id, rows = None, []

    with open(path, encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                if line[1:].split("=")[0].strip() == "sent_id":
                    sent_id = line.split("=", 1)[1].strip()
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise ValidationError(f"line {lineno}: expected 10 CoNLL-U columns, got {len(cols)}")
            idx = cols[0]
            if "-" in idx or "." in idx:
                raise ValidationError(f"line {lineno}: multiword/empty node ids are not supported ({idx})")
            word_index = int(idx) - 1
            head_col = int(cols[6])
            head = word_index if head_col == 0 else head_col - 1
            rows.append({
                "form": cols[1], "pos": cols[3], "head": head, "deprel": cols[7],
                "char_start": None, "char_end": None,
            })
    flush()
    return blocks


# ---------------------------------------------------------------------------
# Record validation

def _validate_parse(sentence: str, tokens: tuple[DepToken, ...]) -> None:
    roots = [t for t in tokens if t.head == t.index]
    if len(roots) != 1:
        raise ValidationError(f"parse must have exactly one root, found {len(roots)}")
    last_end = 0
    for t in tokens:
        if not (0 <= t.head < len(tokens)):
            raise ValidationError(f"token {t.index} head {t.head} out of range")
        if sentence[t.char_start:t.char_end] != t.form:
            raise ValidationError(f"token {t.index} offsets do not match form {t.form!r}")
        if t.char_start < last_end:
            raise ValidationError(f"token {t.index} offsets overlap the previous token")
        last_end = t.char_end


def _validate_spans(sentence: str, triple: Triple) -> None:
    spans = list(triple.spans().items())
    for kind, s in spans:
        if s.char_start >= s.char_end:
            raise ValidationError(f"{kind} span is empty")
        if sentence[s.char_start:s.char_end] != s.text:
            raise ValidationError(
                f"span mismatch: {kind} text {s.text!r} != sentence[{s.char_start}:{s.char_end}]"
            )
    for i in range(len(spans)):
        for j in range(i + 1, len(spans)):
            a, b = spans[i][1], spans[j][1]
            if a.char_start < b.char_end and b.char_start < a.char_end:
                raise ValidationError(f"entity spans overlap: {spans[i][0]} and {spans[j][0]}")


def align_spans_to_words(sample: TrajectorySample | SampleView) -> dict[str, list[int]]:
    """Word indices covering each entity span.

    The span must begin on a token start and end on a token end; a span
    cutting through a token has no whole-token cover and is an error.
    """
    view = sample if isinstance(sample, SampleView) else sample.active_view()
    out: dict[str, list[int]] = {}
    for kind, span in view.triple.spans().items():
        covering = [t for t in view.parse
                    if t.char_start < span.char_end and span.char_start < t.char_end]
        if not covering:
            raise ValidationError(f"{kind} span covers no parse token")
        if covering[0].char_start != span.char_start or covering[-1].char_end != span.char_end:
            raise ValidationError(
                f"{kind} span {span.text!r} crosses a token boundary; no whole-token cover"
            )
        out[kind] = [t.index for t in covering]
    return out


def _sample_from_record(rec: dict, parses: Optional[dict[str, list[dict]]],
                        require_parse: bool = True) -> TrajectorySample:
    for key in ("id", "sentence", "person", "time", "location"):
        if key not in rec:
            raise ValidationError(f"missing field {key!r}")
    sentence = rec["sentence"]

    def span(key):
        s = rec[key]
        return EntitySpan(s["text"], int(s["start"]), int(s["end"]))

    triple = Triple(span("person"), span("time"), span("location"))
    _validate_spans(sentence, triple)

    label = rec.get("label")
    if label is not None:
        label = taxonomy.parse_label(label)

    sid = str(rec["id"])
    parse: tuple[DepToken, ...] = ()
    refined_parse = None
    refined = rec.get("refined_sentence")

    def rows_for(key: str, text: str):
        if rec.get(key) is not None:
            return _tokens_from_rows(text, rec[key])
        if parses is not None:
            lookup = sid if key == "parse" else sid + ".ref"
            if lookup in parses:
                return _tokens_from_rows(text, parses[lookup])
        return None

    got = rows_for("parse", sentence)
    if got is None:
        if require_parse:
            raise ValidationError("no dependency parse provided")
    else:
        parse = got
        _validate_parse(sentence, parse)

    if refined is not None:
        got_ref = rows_for("parse_ref", refined)
        if got_ref is not None:
            refined_parse = got_ref
            _validate_parse(refined, refined_parse)

    sample = TrajectorySample(
        id=sid, sentence=sentence, triple=triple, parse=parse,
        refined_sentence=refined, refined_parse=refined_parse,
        label=label, person_resolved=rec.get("person_resolved"),
    )
    if parse:
        align_spans_to_words(sample)  # entity spans must map onto whole tokens
        if refined is not None and refined_parse is not None:
            align_spans_to_words(sample.active_view("llm-refined"))
    return sample


def load_samples(samples_path, parses_path=None, strict: bool = False,
                 require_parse: bool = True) -> tuple[list[TrajectorySample], RejectionReport]:
    """Load and validate samples; malformed records are rejected with
    line-numbered diagnostics (or raised immediately under ``strict``)."""
    parses = parse_conllu(parses_path) if parses_path else None
    samples: list[TrajectorySample] = []
    report = RejectionReport()
    seen: set[str] = set()
    with open(samples_path, encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            if not raw.strip():
                continue
            sid = "?"
            try:
                rec = json.loads(raw)
                sid = str(rec.get("id", "?"))
                if sid in seen:
                    raise ValidationError(f"duplicate sample id {sid!r}")
                sample = _sample_from_record(rec, parses, require_parse=require_parse)
                seen.add(sid)
                samples.append(sample)
            except (ValidationError, ValueError, KeyError, TypeError) as err:
                if strict:
                    raise ValidationError(f"line {lineno}: {err}") from err
                report.add(lineno, sid, f"{err} at line {lineno}")
    return samples, report


# ---------------------------------------------------------------------------
# Canonical serialization (loader round-trips byte-stably)

def _span_dict(s: EntitySpan) -> dict:
    return {"text": s.text, "start": s.char_start, "end": s.char_end}

def _parse_rows(tokens: tuple[DepToken, ...]) -> list[dict]:
    return [
        {"form": t.form, "pos": t.pos, "head": t.head, "deprel": t.deprel,
         "char_start": t.char_start, "char_end": t.char_end}
        for t in tokens
    ]

def sample_to_record(sample: TrajectorySample) -> dict:
    rec = {
        "id": sample.id,
        "sentence": sample.sentence,
        "person": _span_dict(sample.triple.person),
        "time": _span_dict(sample.triple.time),
        "location": _span_dict(sample.triple.location),
    }
    if sample.parse:
        rec["parse"] = _parse_rows(sample.parse)
    if sample.refined_sentence is not None:
        rec["refined_sentence"] = sample.refined_sentence
    if sample.refined_parse is not None:
        rec["parse_ref"] = _parse_rows(sample.refined_parse)
    if sample.label is not None:
        rec["label"] = sample.label
    if sample.person_resolved is not None:
        rec["person_resolved"] = sample.person_resolved
    return rec


def dump_samples(samples: Iterable[TrajectorySample], path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for s in samples:
            fp.write(json.dumps(sample_to_record(s), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Folds

def make_folds(samples: list[TrajectorySample], k: int, seed: int) -> FoldPlan:
    """Stratified-by-type fold assignment, deterministic given the seed.

    Within each label stratum ids are shuffled and dealt greedily to the
    currently smallest fold, so fold sizes differ by at most one both
    within every stratum and globally. Strata smaller than k spread one
    sample per fold until exhausted.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    unlabeled = [s.id for s in samples if s.label is None]
    if unlabeled:
        raise ValueError(f"every sample must be labeled; first unlabeled: {unlabeled[0]}")

    by_label: dict[str, list[str]] = {}
    for s in samples:
        by_label.setdefault(s.label, []).append(s.id)

    rng = random.Random(seed)
    sizes = [0] * k
    assignments: dict[str, int] = {}
    for label in sorted(by_label):
        ids = sorted(by_label[label])
        rng.shuffle(ids)
        for sid in ids:
            fold = min(range(k), key=lambda f: (sizes[f], f))
            assignments[sid] = fold
            sizes[fold] += 1
    return FoldPlan(k=k, assignments=assignments)
