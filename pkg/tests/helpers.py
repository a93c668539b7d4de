"""Shared test utilities: compact parse construction and fixture samples."""

from __future__ import annotations

import json

from ltc.dataset import DepToken, EntitySpan, TrajectorySample, Triple

ROOT = -1


def build_parse(words):
    """words: [(form, pos, head, deprel)] with head ROOT for the root.

    Returns (sentence, tuple[DepToken]) with offsets from single-space
    joining.
    """
    forms = [w[0] for w in words]
    sentence = " ".join(forms)
    tokens = []
    cursor = 0
    for i, (form, pos, head, deprel) in enumerate(words):
        start = sentence.index(form, cursor)
        tokens.append(DepToken(index=i, form=form, pos=pos,
                               head=i if head == ROOT else head, deprel=deprel,
                               char_start=start, char_end=start + len(form)))
        cursor = start + len(form)
    return sentence, tuple(tokens)


def span_for_words(sentence, parse, word_indices):
    first, last = parse[word_indices[0]], parse[word_indices[-1]]
    return EntitySpan(sentence[first.char_start:last.char_end],
                      first.char_start, last.char_end)


def make_sample(sample_id, words, person_words, time_words, location_words,
                label=None, person_resolved=None):
    sentence, parse = build_parse(words)
    triple = Triple(
        person=span_for_words(sentence, parse, person_words),
        time=span_for_words(sentence, parse, time_words),
        location=span_for_words(sentence, parse, location_words),
    )
    return TrajectorySample(id=sample_id, sentence=sentence, triple=triple,
                            parse=parse, label=label, person_resolved=person_resolved)


def sample_record(sample):
    """JSONL record with the parse embedded."""
    from ltc.dataset import sample_to_record
    return sample_to_record(sample)


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fp:
        for rec in records:
            fp.write(json.dumps(rec, ensure_ascii=False) + "\n")


# The running example: triple entities far apart in the sentence, close
# in the dependency graph.
FIG_WORDS = [
    ("He", "PRON", 1, "nsubj"),
    ("enlisted", "VERB", ROOT, "root"),
    ("as", "ADP", 5, "case"),
    ("a", "DET", 5, "det"),
    ("staff", "NOUN", 5, "compound"),
    ("cadet", "NOUN", 1, "obl"),
    ("at", "ADP", 10, "case"),
    ("the", "DET", 10, "det"),
    ("Royal", "PROPN", 10, "compound"),
    ("Military", "PROPN", 10, "compound"),
    ("College", "PROPN", 1, "obl"),
    ("in", "ADP", 12, "case"),
    ("Adelaide", "PROPN", 10, "nmod"),
    ("in", "ADP", 14, "case"),
    ("1905", "NUM", 1, "obl"),
    (".", "PUNCT", 1, "punct"),
]


def fig_sample(label="Career"):
    return make_sample("fig1", FIG_WORDS, person_words=[0], time_words=[14],
                       location_words=[12], label=label)


# Copular sentence: no main verb, multiword time and location spans.
FLUTE_WORDS = [
    ("From", "ADP", 1, "case"),
    ("1946", "NUM", 7, "obl"),
    ("to", "ADP", 3, "case"),
    ("1948", "NUM", 1, "nmod"),
    ("he", "PRON", 7, "nsubj"),
    ("was", "AUX", 7, "cop"),
    ("flute", "NOUN", 7, "compound"),
    ("professor", "NOUN", ROOT, "root"),
    ("at", "ADP", 9, "case"),
    ("Kneller", "PROPN", 7, "nmod"),
    ("Hall", "PROPN", 9, "flat"),
    (".", "PUNCT", 7, "punct"),
]


def flute_sample(label="Career"):
    return make_sample("flute", FLUTE_WORDS, person_words=[4], time_words=[0, 1, 2, 3],
                       location_words=[9, 10], label=label)


MOVED_WORDS = [
    ("He", "PRON", 1, "nsubj"),
    ("moved", "VERB", ROOT, "root"),
    ("to", "ADP", 3, "case"),
    ("Paris", "PROPN", 1, "obl"),
    ("in", "ADP", 5, "case"),
    ("1905", "NUM", 1, "obl"),
    (".", "PUNCT", 1, "punct"),
]


def moved_sample(label="Movement"):
    return make_sample("moved", MOVED_WORDS, person_words=[0], time_words=[5],
                       location_words=[3], label=label)
