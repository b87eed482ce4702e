"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""
import math
import time

import numpy as np

from molstory.canon import fragment_from_smiles, standardize_attachment, AttachmentRegistry
from molstory.corpus import default_model
from molstory.engine import FragmentCountPredictor, IdentityPredictor, StoryGenerator, calibrate, kde_fit, kde_score
from molstory.engine.training import story_samples
from molstory.fragmenter import generate_fragments
from molstory.geometry import GeometryProvider
from molstory.io import build_vocabulary, ingest_csv
from molstory.corpus import corpus_path
from molstory.model import (
    backward, collate, forward, forward_step, geometry_attention, init_initializer, initializer_loss,
    story_loss,
)
from molstory.model.layers import attention_backward, attention_forward
from molstory.molgraph import allowed_valences, canonical_smiles, parse_smiles, write_canonical_smiles
from molstory.story import decompose, replay_story, unroll_story
from conftest import automorphism_orbits, central_difference, grad_mismatch, toy_model_setup

MEMORIZE = dict(d_f=64, d_a=16, heads=4, layers=2, ff=128, learning_rate=3e-3, batch_size=64, dropout=0.0,
                lr_schedule="cosine")


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance {n:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_01_round_trip(capsys, corpus):
    t = time.perf_counter()
    bad = []
    for r in corpus:
        m = parse_smiles(r.smiles)
        dec = decompose(m)
        target = write_canonical_smiles(m)
        for seed in range(10):
            if write_canonical_smiles(replay_story(unroll_story(m, seed, dec))) != target:
                bad.append((r.smiles, seed))
    dt = time.perf_counter() - t
    report(capsys, 1, len(corpus) >= 200 and not bad and dt < 60,
           f"round trip {len(corpus)} molecules x 10 seeds, {len(bad)} failures, {dt:.1f}s")


def test_02_orbit_oracle(capsys, corpus):
    vocab = build_vocabulary(corpus)
    checked, wrong = 0, []
    for smi in vocab.fragments:
        cf = fragment_from_smiles(smi)
        if cf.size > 8:
            continue
        checked += 1
        classes = {}
        for i, v in enumerate(cf.std_map):
            classes.setdefault(v, set()).add(i)
        if {frozenset(c) for c in classes.values()} != automorphism_orbits(cf.graph):
            wrong.append(smi)
    report(capsys, 2, checked > 0 and not wrong, f"{checked} fragments checked, {len(wrong)} disagree {wrong}")


def test_03_pyrazine_example(capsys):
    cf = fragment_from_smiles("c1cnccn1")
    reg = AttachmentRegistry()
    stds = {standardize_attachment(t, cf, reg) for t in [(3, 4), (4, 3), (1, 0), (0, 1)]}
    ok = (len(cf.possible_maps) == 4
          and [f[0] for f in cf.possible_maps] == [0, 3, 4, 1] and cf.std_map[0] == 0
          and [f[2] for f in cf.possible_maps] == [2, 5, 2, 5] and cf.std_map[2] == 2
          and len(stds) == 1 and cf.orbit_key((3, 4)) == (0, 0))
    report(capsys, 3, ok, f"{len(cf.possible_maps)} maps, std_map={cf.std_map}, {len(stds)} standard attachment")


def test_04_edge_partition(capsys, corpus):
    violations = 0
    for r in corpus:
        m = parse_smiles(r.smiles)
        owned = sorted(k for f in generate_fragments(m) for k in f.bonds)
        violations += owned != list(range(len(m.bonds)))
    report(capsys, 4, violations == 0, f"{violations} molecules whose fragment bonds do not partition")


def _gradient_suite():
    worst = {}
    rng = np.random.default_rng(0)
    q, k, v, d = rng.normal(size=(3, 4)), rng.normal(size=(5, 4)), rng.normal(size=(5, 4)), rng.uniform(0, 3, (3, 5))
    w = rng.normal(size=(3, 4))
    scale = np.array(0.6)
    f = lambda: float((geometry_attention(q, k, v, d, float(scale)) * w).sum())
    _, cache = attention_forward(q, k, v, d, float(scale))
    grads = attention_backward(w, cache)[:4]
    worst["geometry_attention"] = max(grad_mismatch(central_difference(f, x), g) for x, g in zip((q, k, v, scale), grads))

    cfg, params, batch, _ = toy_model_setup()
    _, g = story_loss(batch, params, cfg)
    worst["story_loss"] = max(grad_mismatch(central_difference(lambda: story_loss(batch, params, cfg)[0], val), g[n])
                              for n, val in params.items())

    feats = {"frag": batch.frag[0][batch.mask[0]], "sat": batch.sat[0][batch.mask[0]], "cond": batch.cond[0],
             "dist": batch.dist[0][np.ix_(batch.mask[0], batch.mask[0])], "focal": int(batch.focal[0]),
             "att_dist": batch.att_dist[0][batch.mask[0]], "att_type": int(batch.att_type[0])}
    single = collate([feats])
    wl = rng.normal(size=params["head_b"].shape)
    fs = lambda: float(forward_step(feats, params, cfg) @ wl)
    _, caches = forward(single, params, cfg)
    g = backward(wl[None, :], single, params, cfg, caches)
    worst["forward_step"] = max(grad_mismatch(central_difference(fs, val), g[n]) for n, val in params.items())

    ip = init_initializer(3, 5, hidden=6, seed=2)
    X, Y = rng.normal(size=(4, 3)), rng.integers(0, 2, (4, 5))
    _, g = initializer_loss(X, Y, ip)
    worst["initializer_loss"] = max(grad_mismatch(central_difference(lambda: initializer_loss(X, Y, ip)[0], val), g[n])
                                    for n, val in ip.items())
    return worst


def test_05_gradient_suite(capsys):
    t = time.perf_counter()
    worst = _gradient_suite()
    dt = time.perf_counter() - t
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(capsys, 5, max(worst.values()) < 1e-4 and dt < 30, f"max rel error: {detail}; {dt:.1f}s")


def test_06_memorization(capsys, corpus):
    recs = corpus[:20]
    smiles, cond = [r.smiles for r in recs], np.array([r.conditions for r in recs])
    model = StoryGenerator(epochs=100_000, max_steps=2000, init_epochs=50, seed=0, **MEMORIZE).fit(smiles, cond)
    acc = np.mean([model.score(smiles, cond, seed=s) for s in (101, 102, 103)])
    report(capsys, 6, model.n_steps_ <= 2000 and acc >= 0.95,
           f"next-action accuracy {acc:.4f} on resampled stories after {model.n_steps_} steps")


def _valence_ok(m):
    return all(m.bond_order_sum(i) + a.implicit_h in allowed_valences(a.element, a.formal_charge)
               for i, a in enumerate(m.atoms))


def test_07_validity_by_construction(capsys):
    model = default_model()
    vocab = set(model.actions_.fragments)
    rng = np.random.default_rng(2024)
    lo, hi = np.array([-1.0, -0.8, 1.5]), np.array([6.0, 1.8, 3.8])
    valence, external = 0, 0
    for _ in range(1000):
        mol, story = model.generate(rng.uniform(lo, hi), seed=rng.integers(2**32))
        valence += not _valence_ok(mol) or canonical_smiles(write_canonical_smiles(mol)) != story.final_smiles
        frags = {cf.smiles for cf, _ in decompose(mol).placements}
        frags |= {s.fragment for s in story.steps if s.fragment}
        external += not frags <= vocab
    report(capsys, 7, valence == 0 and external == 0,
           f"1000 molecules: {valence} valence violations, {external} with out-of-vocabulary fragments")


def test_08_calibration(capsys, corpus):
    model = default_model()
    recs = corpus[:200]
    rep = calibrate(recs, "logS", model, FragmentCountPredictor("logS").fit(), n_prompts=30, n_per_prompt=20, seed=0)
    r = rep.pearson()
    ident = calibrate(recs, "logS", model, IdentityPredictor().fit(), n_prompts=30, n_per_prompt=2, seed=1)
    ok_rows = np.isfinite(ident.mean)
    diag = bool(ok_rows.any() and np.array_equal(ident.mean[ok_rows], ident.prompts[ok_rows]))
    report(capsys, 8, r >= 0.8 and diag, f"Pearson r={r:.3f} over 30 prompts; identity diagonal exact={diag}")


def test_09_kde_unit(capsys):
    d = kde_fit(np.array([[1.0, 2.0, 3.0]]), 0.14)
    got = kde_score(d, [1.0, 2.0, 3.0])
    want = (2 * math.pi) ** -1.5 * 0.14 ** -3
    rel = abs(got - want) / want
    report(capsys, 9, rel <= 1e-9, f"self-density {got:.12g} vs {want:.12g}, rel {rel:.1e}")


def test_10_geometry_ablation(capsys, corpus):
    recs = corpus[:8]
    model = StoryGenerator(epochs=2, d_f=16, d_a=8, heads=2, layers=2, ff=16, init_epochs=2, provider="none",
                           geometry_scale=0.0, freeze_geometry=True, seed=1)
    model.fit([r.smiles for r in recs], np.array([r.conditions for r in recs]))
    rng = np.random.default_rng(0)
    feats, labels = [], []
    for r in recs:
        dec = decompose(parse_smiles(r.smiles))
        _, f, y = story_samples(dec, rng.normal(size=3), model.vocabulary_, model.actions_, GeometryProvider("none"), rng)
        feats += f
        labels += y
    batch = collate(feats, labels)
    cfg = model.model_config
    with_none = forward(batch, model.params_, cfg)[0]
    batch.dist = rng.uniform(0, 10, batch.dist.shape)
    batch.att_dist = rng.uniform(0, 10, batch.att_dist.shape)
    bias_free = forward(batch, model.params_, cfg)[0]
    diff = float(np.max(np.abs(with_none - bias_free)))
    scale = float(model.params_["geometry_scale"])
    report(capsys, 10, scale == 0.0 and diff <= 1e-10, f"geometry_scale={scale}, max |logit diff|={diff:.1e}")


def _pipeline(seed):
    records = ingest_csv(str(corpus_path()))
    vocab = build_vocabulary(records)
    model = StoryGenerator(epochs=5, d_f=32, d_a=8, heads=4, layers=2, ff=64, init_hidden=32, init_epochs=20,
                           batch_size=32, learning_rate=1e-3, seed=seed)
    model.fit([r.smiles for r in records], np.array([r.conditions for r in records]), vocabulary=vocab)
    gen = [(write_canonical_smiles(m), s.steps) for m, s in model.sample([2.0, 0.3, 2.5], 10, seed=seed)]
    params = b"".join(model.params_[k].tobytes() for k in sorted(model.params_))
    return vocab.dumps(), params, [row["loss"] for row in model.history_], gen


def test_11_determinism(capsys):
    t = time.perf_counter()
    a, b = _pipeline(7), _pipeline(7)
    dt = time.perf_counter() - t
    same = [x == y for x, y in zip(a, b)]
    report(capsys, 11, all(same) and dt < 300,
           f"vocab/params/losses/generations identical: {same}, {dt:.0f}s for two runs")
