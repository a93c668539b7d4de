"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they complete.
"""

import dataclasses
import json
import math
import random
import time

import numpy as np
import torch

from gen import lexical_corpus, random_tree_sample, two_clause_corpus
from helpers import fig_sample, moved_sample
from oracles import oracle_entity_path_nodes, oracle_scl

CORPUS = "tests/fixtures/corpus"


def report(n, title, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {n}] {status} {title}" + (f" ({detail})" if detail else ""))
    assert ok, f"criterion {n}: {title} {detail}"


# ---------------------------------------------------------------------------

def test_criterion_1_mask_oracle_equivalence():
    from ltc.syntax_graph import build_graph, entity_verb_paths, tokenize_with_markers
    from ltc.tokenization import WholeWordTokenizer

    tok = WholeWordTokenizer()
    rng = random.Random(31415)
    t0 = time.monotonic()
    mismatches = 0
    trees = 0
    while trees < 500:
        sample = random_tree_sample(rng, rng.randrange(4, 13))
        alignment = tokenize_with_markers(sample, tok)
        graph = build_graph(sample, alignment)
        sub = entity_verb_paths(graph)
        adj = graph.adjacency()
        trees += 1
        if not graph.verb_nodes:
            if not sub.fallback:
                mismatches += 1
            continue
        for kind, nodes in graph.entity_nodes.items():
            expected = oracle_entity_path_nodes(adj, sorted(nodes), sorted(graph.verb_nodes))
            if sub.path_nodes_per_entity[kind] != frozenset(expected):
                mismatches += 1
    elapsed = time.monotonic() - t0
    report(1, "mask oracle equivalence on 500 random trees",
           mismatches == 0 and elapsed < 10.0,
           f"{mismatches} mismatches, {elapsed:.2f}s")


def test_criterion_2_contraction_witness():
    from ltc.syntax_graph import (build_graph, mean_pairwise_graph_distance,
                                  mean_pairwise_sentence_distance,
                                  tokenize_with_markers)
    from ltc.tokenization import WholeWordTokenizer

    sample = fig_sample()
    alignment = tokenize_with_markers(sample, WholeWordTokenizer())
    graph = build_graph(sample, alignment)
    sent = mean_pairwise_sentence_distance(alignment)
    graph_d = mean_pairwise_graph_distance(graph)
    ok = abs(sent - 25 / 3) < 1e-12 and graph_d <= 3.0
    report(2, "triple scattered 8.33 words apart but close in the graph",
           ok, f"sentence {sent:.2f} words vs graph {graph_d:.2f} edges")


def test_criterion_3_metric_identity():
    from ltc.metrics import weighted_prf

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        cm = rng.integers(0, 50, size=(24, 24))
        if cm.sum() == 0:
            cm[0, 0] = 1
        rep = weighted_prf(cm)
        worst = max(worst, abs(rep.weighted_recall - np.trace(cm) / cm.sum()))
    report(3, "weighted recall equals trace/total on 100 random matrices",
           worst < 1e-12, f"max abs error {worst:.2e}")


def test_criterion_4_loss_oracles():
    from ltc.losses import ce_loss, combined_loss, scl_loss

    vecs = [[1.0, 0.5, -0.25], [0.5, 1.0, 0.25], [-1.0, 0.25, 1.0]]
    labels = [0, 0, 1]
    scl_err = abs(scl_loss(torch.tensor(vecs, dtype=torch.float64), labels, 0.1).item()
                  - oracle_scl(vecs, labels, 0.1))

    ce_err = abs(ce_loss(torch.zeros((4, 24), dtype=torch.float64), [0, 7, 13, 23]).item()
                 - math.log(24))

    l_ce, l_scl = torch.tensor(1.25, dtype=torch.float64), torch.tensor(2.5, dtype=torch.float64)
    endpoints_ok = (combined_loss(l_ce, l_scl, 0.0).item() == 1.25
                    and combined_loss(l_ce, l_scl, 1.0).item() == 2.5)

    # classifier-weight gradients against central finite differences
    rng = np.random.default_rng(42)
    h_scl = torch.tensor(rng.normal(size=(2, 8)))
    w = torch.tensor(rng.normal(size=(5, 8)), requires_grad=True)
    gold = torch.tensor([3, 1])

    def loss_for(weight):
        return torch.nn.functional.cross_entropy(h_scl @ weight.T, gold)

    loss_for(w).backward()
    eps, max_rel = 1e-6, 0.0
    base = w.detach().clone()
    for i in range(5):
        for j in range(8):
            hi, lo = base.clone(), base.clone()
            hi[i, j] += eps
            lo[i, j] -= eps
            fd = (loss_for(hi).item() - loss_for(lo).item()) / (2 * eps)
            g = w.grad[i, j].item()
            max_rel = max(max_rel, abs(g - fd) / max(abs(g), abs(fd), 1e-8))

    ok = scl_err < 1e-10 and ce_err < 1e-10 and endpoints_ok and max_rel < 1e-4
    report(4, "loss oracles (scl fixture, uniform ce, blend endpoints, gradients)",
           ok, f"scl {scl_err:.1e}, ce {ce_err:.1e}, grad rel {max_rel:.1e}")


def test_criterion_5_fusion_contracts():
    from ltc.features import encode_sample
    from ltc.fusion import fuse
    from ltc.tokenization import HashTokenizer

    states = torch.tensor([[1.0, 3.0], [5.0, 7.0], [9.0, 11.0]], dtype=torch.float64)
    h1p, h2, h_scl = fuse(states, torch.tensor([1, 0, 1]), torch.tensor([1, 1, 1]))
    fixture_ok = (h1p.tolist() == [5.0, 7.0] and h2.tolist() == [9.0, 11.0]
                  and h_scl.tolist() == [5.0, 7.0, 9.0, 11.0])

    rng = np.random.default_rng(5)
    free = torch.tensor(rng.normal(size=(6, 4)))
    ones = torch.ones(6, dtype=torch.long)
    mean_ok = torch.allclose(fuse(free, ones, ones)[0], free.mean(dim=0), atol=1e-12)

    z1, z2, zscl = fuse(states, torch.tensor([1, 1, 1]), torch.tensor([1, 1, 1]),
                        zero_trajectory=True)
    ablate_ok = (z1.tolist() == [0.0, 0.0] and z2.tolist() == [9.0, 11.0]
                 and len(zscl) == 4)

    # no-mask ablation: token ids and labels bit-identical, only masks differ
    tok = HashTokenizer(vocab_size=2048, chunk=4, max_len=64)
    sample = moved_sample()
    full = encode_sample(sample, tok)
    entity_only = encode_sample(sample, tok, ablation="no-mask")
    diff_ok = (full.token_ids == entity_only.token_ids
               and full.label_id == entity_only.label_id
               and full.mask != entity_only.mask)

    ok = fixture_ok and mean_ok and ablate_ok and diff_ok
    report(5, "fusion pooling fixtures and ablation bit-diffs", ok)


def test_criterion_6_desk_scale_learnability():
    from ltc.losses import LossConfig
    from ltc.training import EncoderConfig, TrainConfig, run_cv

    t0 = time.monotonic()
    config = TrainConfig(
        seed=7, folds=3, epochs=5, batch_size=16, lr=1e-3,
        loss=LossConfig(blend=0.7, tau=0.1, normalize=True),
        encoder=EncoderConfig(vocab_size=2048, dim=32, n_layers=2, n_heads=4,
                              max_len=64, dropout=0.0),
    )
    learn = run_cv(lexical_corpus(n=300, seed=99), config)
    learn_acc = learn.aggregate()["accuracy"]

    # path-vs-entity-mask comparison on the two-clause corpus: the class verb
    # sits on the entity-verb path, the other clause's verb off it
    pair_corpus = two_clause_corpus(n=300, seed=99)
    pair_cfg = dataclasses.replace(config, epochs=8)
    full_acc = run_cv(pair_corpus, pair_cfg).aggregate()["accuracy"]
    nomask_acc = run_cv(
        pair_corpus, dataclasses.replace(pair_cfg, ablation="no-mask")
    ).aggregate()["accuracy"]
    elapsed = time.monotonic() - t0

    ok = learn_acc >= 0.9 and nomask_acc < full_acc and elapsed < 600
    report(6, "desk-scale learnability and no-mask ablation deficit", ok,
           f"cv acc {learn_acc:.3f}; full {full_acc:.3f} vs entity-only mask "
           f"{nomask_acc:.3f}; {elapsed:.0f}s")


def test_criterion_7_refinement_constraints(tmp_path):
    from ltc.refine import StubEndpoint, check_constraints, refine_batch

    sample = moved_sample()
    sent, triple = sample.sentence, sample.triple
    violating = [
        sent,                                   # echo
        "  " + sent + "  ",                     # echo modulo whitespace
        "He moved away in 1905 .",              # drops the location
        "Someone moved to Paris in 1905 .",     # drops the person
        "He moved to Paris in some year .",     # drops the time
        "he moved to paris in 1905 .",          # case change breaks exact words
        "",                                     # empty
    ]
    rejected = sum(1 for v in violating if not check_constraints(sent, v, triple).all_pass())

    from ltc.dataset import load_samples
    samples, _ = load_samples(f"{CORPUS}/samples.jsonl", f"{CORPUS}/parses.conllu")
    outs = []
    for _ in range(2):
        endpoint = StubEndpoint(f"{CORPUS}/llm_stub.json")
        rows = [(s.id, r.refined, r.attempts, r.fell_back)
                for s, r in refine_batch(samples, endpoint)]
        outs.append(json.dumps(rows).encode())
    ok = rejected == len(violating) and outs[0] == outs[1]
    report(7, "constraint checker rejects all violations; stub batch reproducible",
           ok, f"{rejected}/{len(violating)} rejected")


def test_criterion_8_analytics_oracles():
    from ltc.analytics import (GeoPoint, LabeledTuple, PersonTimeline,
                               departure_ratio_series, distance_km,
                               paired_series, pearson, type_ratio_series)

    x = list(range(10))
    r, p = pearson(x, [-v for v in x])
    pearson_ok = r == -1.0 and p == 0.0

    hav = distance_km(GeoPoint(0.0, 0.0), GeoPoint(0.0, 1.0))
    hav_ok = abs(hav - 111.195) < 0.01

    def tl(person, rows):
        return PersonTimeline(person, [
            LabeledTuple(person, y, loc, t, "", country=c) for y, loc, t, c in rows])

    series = departure_ratio_series([
        tl("A", [(1930, "Berlin", "Career", "Germany"), (1933, "Paris", "Career", "France")]),
        tl("B", [(1931, "Berlin", "Career", "Germany"), (1934, "Munich", "Career", "Germany")]),
    ], "Germany")
    dep_ok = series.ratio(1930) == 0.5

    # war-spike corpus: military share planted high inside two windows,
    # competition share moving oppositely
    rng = np.random.default_rng(8)
    wars = [(1915, 1920), (1940, 1945)]
    tuples = []
    for i in range(6000):
        year = int(rng.integers(1900, 2001))
        share = 0.6 if any(a <= year < b for a, b in wars) else 0.1
        u = rng.random()
        t = "Military" if u < share else ("Competition" if u < 0.6 else "Career")
        tuples.append(LabeledTuple(f"p{i}", year, "x", t, ""))
    mil = type_ratio_series(tuples, "Military", year_range=(1900, 2000))
    comp = type_ratio_series(tuples, "Competition", year_range=(1900, 2000))
    mil_map = dict(mil)
    spikes_ok = all(mil_map[wb] > mil_map[pb]
                    for wb in (1915, 1940) for pb in (1925, 1960, 1980))
    r_mc, _ = pearson(*paired_series(mil, comp))
    sign_ok = r_mc < 0

    ok = pearson_ok and hav_ok and dep_ok and spikes_ok and sign_ok
    report(8, "analytics oracles (pearson, haversine, departures, war spikes)",
           ok, f"r={r_mc:.2f} on planted series")


def test_criterion_9_end_to_end_smoke(tmp_path, capsys, monkeypatch):
    from ltc.cli import main
    from ltc.manifest import digest_tree, read_manifest

    t0 = time.monotonic()
    monkeypatch.setenv("LTC_GAZETTEER_FILE", f"{CORPUS}/gazetteer.json")
    store = tmp_path / "store"
    run_dir = tmp_path / "run"
    tuples = tmp_path / "tuples.jsonl"
    analysis = tmp_path / "analysis"

    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "[run]\nseed = 7\n"
        "[dataset]\nfolds = 2\n"
        "[encoder]\nvocab_size = 2048\ndim = 32\nn_layers = 1\nn_heads = 4\n"
        "max_len = 64\ndropout = 0.0\n"
        "[loss]\nlambda = 0.7\ntau = 0.1\nnormalize = true\n"
        "[train]\nlr = 1e-3\nepochs = 1\nbatch_size = 8\n"
        "[analytics]\nyear_min = 1880\nyear_max = 2000\nbin_width = 5\n"
        "home_country = Peru\n"
    )

    steps = [
        ["ingest", "--samples", f"{CORPUS}/samples.jsonl",
         "--parses", f"{CORPUS}/parses.conllu", "--out", str(store)],
        ["graph", "--store", str(store), "--sample", "s01",
         "--dot", str(tmp_path / "s01.dot")],
        ["train", "--config", str(cfg), "--samples", str(store / "samples.jsonl"),
         "--out", str(run_dir)],
        ["classify", "--checkpoint", str(run_dir / "checkpoint"),
         "--in", str(store / "samples.jsonl"), "--out", str(tuples)],
        ["--stub", "analyze", "ratios", "--config", str(cfg), "--in", str(tuples),
         "--out", str(analysis), "--types", "Military,Career"],
        ["--stub", "analyze", "lifestages", "--config", str(cfg), "--in", str(tuples),
         "--out", str(analysis)],
        ["--stub", "analyze", "departures", "--config", str(cfg), "--in", str(tuples),
         "--out", str(analysis)],
        ["--stub", "analyze", "distances", "--config", str(cfg), "--in", str(tuples),
         "--out", str(analysis)],
    ]
    codes = [main(argv) for argv in steps]
    capsys.readouterr()
    elapsed = time.monotonic() - t0

    chain_ok = True
    # manifests chain by digest: each stage's recorded input digest matches
    # the previous stage's actual output
    ingest_m = read_manifest(store / "manifest.json")
    train_m = read_manifest(run_dir / "manifest.json")
    classify_m = read_manifest(tuples.parent / (tuples.name + ".manifest.json"))
    ratios_m = read_manifest(analysis / "ratios.manifest.json")
    chain_ok &= ingest_m["outputs"]["samples"] == train_m["inputs"]["samples"]
    chain_ok &= train_m["outputs"]["checkpoint"] == classify_m["inputs"]["checkpoint"]
    chain_ok &= classify_m["outputs"]["tuples"] == ratios_m["inputs"]["tuples"]
    chain_ok &= ingest_m["outputs"]["samples"] == digest_tree(store / "samples.jsonl")

    artifacts = [store / "samples.jsonl", tmp_path / "s01.dot",
                 run_dir / "cv_report.json", run_dir / "checkpoint" / "model.pt",
                 tuples, analysis / "ratios.csv", analysis / "ratios.png",
                 analysis / "lifestages.csv", analysis / "lifestages.png",
                 analysis / "departures.csv", analysis / "departures.png",
                 analysis / "distances.csv", analysis / "distances.png"]
    missing = [str(p) for p in artifacts if not p.exists()]

    ok = codes == [0] * len(steps) and not missing and chain_ok and elapsed < 300
    report(9, "end-to-end smoke over the 20-sample fixture corpus", ok,
           f"exit codes {codes}, {elapsed:.0f}s" + (f", missing {missing}" if missing else ""))
