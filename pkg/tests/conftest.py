import itertools

import numpy as np

import pytest
from hypothesis import HealthCheck, settings

from molstory.corpus import load_corpus

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


def automorphism_orbits(m):
    """Atom orbits of the label- and bond-code-preserving permutation group (brute force)."""
    n = m.n_atoms
    label = [(a.element, a.formal_charge, a.implicit_h) for a in m.atoms]
    codes = {m.bonds[k].key: m.bond_code(k) for k in range(len(m.bonds))}
    orbit = {i: {i} for i in range(n)}
    for perm in itertools.permutations(range(n)):
        if any(label[i] != label[perm[i]] for i in range(n)):
            continue
        ok = all(codes.get((min(perm[a], perm[b]), max(perm[a], perm[b]))) == c for (a, b), c in codes.items())
        if ok:
            for i in range(n):
                orbit[i].add(perm[i])
    return {frozenset(s) for s in orbit.values()}


def central_difference(f, x, h=1e-5):
    """Numerical gradient of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x, dtype=float)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return g


def grad_mismatch(numeric, analytic, floor=1e-6):
    """Largest ``|numeric - analytic| / max(|numeric|, |analytic|, floor)``.

    The floor keeps entries whose true gradient is zero (where the numerical
    estimate is pure rounding noise) from dominating the relative error.
    """
    numeric, analytic = np.asarray(numeric, float), np.asarray(analytic, float)
    scale = np.maximum(np.maximum(np.abs(numeric), np.abs(analytic)), floor)
    return float((np.abs(numeric - analytic) / scale).max()) if numeric.size else 0.0


def toy_model_setup(n_molecules=3, seed=0, provider="topological"):
    """Tiny vocabulary + params + a batch of real story states with at most three fragments."""
    from molstory.geometry import GeometryProvider
    from molstory.io import build_vocabulary
    from molstory.model import ModelConfig, collate, init_params
    from molstory.story import decompose
    from molstory.molgraph import parse_smiles
    from molstory.engine.training import story_samples

    smiles = ["CC1Cc2ccccc2C1", "Cc1ccccc1O", "CC(=O)N"][:n_molecules]
    vocab = build_vocabulary(smiles)
    actions = vocab.action_vocabulary()
    cfg = ModelConfig(d_f=8, d_a=4, heads=2, layers=2, ff=6, dropout=0.0, geometry_scale=0.7)
    rng = np.random.default_rng(seed)
    params = init_params(cfg, actions.n_fragments, actions.n_att_types, len(actions), seed=seed)
    for k in params:
        params[k] = np.array(params[k] + rng.normal(scale=0.05, size=params[k].shape))
    feats, labels = [], []
    prov = GeometryProvider(provider)
    for i, s in enumerate(smiles):
        _, f, y = story_samples(decompose(parse_smiles(s)), rng.normal(size=3), vocab, actions, prov, rng)
        keep = [j for j in range(len(f)) if len(f[j]["frag"]) <= 3]
        feats += [f[j] for j in keep][:4]
        labels += [y[j] for j in keep][:4]
    return cfg, params, collate(feats, labels), actions
