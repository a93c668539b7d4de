"""Batch classification of corpus triples into labeled tuples.

Streaming and resumable: already-labeled sample ids in the output file
are skipped on restart, and every input sample ends up either as a
labeled tuple or as a skip-report entry.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import features, taxonomy
from .analytics import LabeledTuple, extract_year
from .dataset import TrajectorySample
from .fusion import FusionClassifier, predict

log = logging.getLogger(__name__)


@dataclass
class SkipReport:
    no_year: int = 0
    encode_failures: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"no_year": self.no_year,
                "encode_failures": [{"id": i, "reason": r} for i, r in self.encode_failures]}


def label_name_for(granularity: str, label_id: int) -> str:
    if granularity == "category":
        return taxonomy.CATEGORY_NAMES[label_id]
    return taxonomy.type_name(label_id)


def classify_samples(samples, model: FusionClassifier, tokenizer, manifest: dict,
                     batch_size: int = 64) -> tuple[list[LabeledTuple], SkipReport]:
    """Label a sample batch; unparseable years yield tuples without a year."""
    granularity = manifest.get("granularity", "type")
    variant = manifest.get("dataset_variant", "regular")
    verb_tags = frozenset(manifest.get("verb_tags", ["VERB"]))
    report = SkipReport()

    encoded = []
    kept: list[TrajectorySample] = []
    for s in samples:
        try:
            encoded.append(features.encode_sample(
                s, tokenizer, variant=variant, verb_tags=verb_tags))
            kept.append(s)
        except Exception as err:  # noqa: BLE001 - malformed corpus rows are reported, not fatal
            report.encode_failures.append((s.id, str(err)))

    tuples: list[LabeledTuple] = []
    for i in range(0, len(encoded), batch_size):
        chunk = encoded[i:i + batch_size]
        ids, mask, validity, _ = features.collate(chunk)
        label_ids, _probs = predict(model, ids, mask, validity)
        for sample, lid in zip(kept[i:i + batch_size], label_ids):
            year = extract_year(sample.triple.time.text)
            if year is None:
                report.no_year += 1
            person = sample.person_resolved or sample.triple.person.text
            tuples.append(LabeledTuple(
                person=person, year=year, location=sample.triple.location.text,
                type=label_name_for(granularity, int(lid)), source_sample_id=sample.id,
            ))
    return tuples, report


def classify_corpus_file(samples_path, out_path, model, tokenizer, manifest: dict,
                         parses_path=None, batch_size: int = 64) -> SkipReport:
    """Resumable file-to-file classification."""
    from .dataset import load_samples

    done: set[str] = set()
    out_path = Path(out_path)
    if out_path.exists():
        with open(out_path, encoding="utf-8") as fp:
            for line in fp:
                if line.strip():
                    done.add(json.loads(line).get("source_sample_id", ""))
        if done:
            log.info("resuming: %d tuples already labeled", len(done))

    samples, rejects = load_samples(samples_path, parses_path)
    todo = [s for s in samples if s.id not in done]
    tuples, report = classify_samples(todo, model, tokenizer, manifest, batch_size)
    with open(out_path, "a", encoding="utf-8") as fp:
        for t in tuples:
            fp.write(json.dumps(t.to_record(), ensure_ascii=False) + "\n")
    for ln, sid, why in rejects.rejects:
        report.encode_failures.append((sid, why))
    return report
