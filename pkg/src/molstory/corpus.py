"""Bundled toy corpus: scaffold x substituent molecules with synthetic properties."""
import csv
import itertools
from importlib import resources

import numpy as np

from .fragmenter import DecompositionError
from .io import DatasetRecord, ingest_csv
from .molgraph import MoleculeError, canonical_smiles, parse_smiles
from .story import decompose, replay_story, unroll_story

SCAFFOLDS = [
    "c1ccc({0})cc1", "c1cc({0})ccc1{1}", "c1cc({0})cc({1})c1", "c1ccc2cc({0})ccc2c1",
    "c1cc({0})ncc1", "c1cnc({0})nc1", "C1CC({0})CCN1", "C1CCC({0})CC1", "c1cc({0})oc1",
    "c1cc({0})sc1", "c1cc({0})[nH]c1", "O=C1CCC({0})CC1", "C1CC1{0}", "c1ccc2[nH]c({0})cc2c1",
    "c1cc({0})c({1})nc1", "C1COCCN1{0}", "C1CCN(CC1){0}", "c1ccc(cc1)C({0})=O", "O=C1NC(=O)C({0})C1",
    "c1nc({0})sc1{1}", "C(C{0})C{1}", "C(=O)({0})N{1}", "c1ccc(cc1)-c1ccc({0})cc1",
    "C1=CC(=O)C=CC1=O", "CC1=CC(=O)C=CC1=O", "O=C1CC(=O)C=C1C(=O)O",
]
SUBSTITUENTS = [
    "", "C", "CC", "O", "OC", "N", "C(=O)O", "C(=O)N", "C#N", "F", "Cl", "Br", "C(C)C",
    "CO", "N(C)C", "S(=O)(=O)N", "C9CC9", "OC(=O)C", "C=O", "C(F)(F)F", "c9ccccc9", "CC(=O)O",
]
MAX_HEAVY = 30


def _fill(template, subs):
    out = template
    for i, s in enumerate(subs):
        out = out.replace("({%d})" % i, f"({s})" if s else "").replace("{%d}" % i, s)
    return out


def _usable(smiles, seeds=10):
    try:
        m = parse_smiles(smiles)
        if m.n_atoms > MAX_HEAVY or m.n_atoms < 3:
            return None
        dec = decompose(m)
        target = canonical_smiles(smiles)
        for seed in range(seeds):
            story = unroll_story(m, seed, dec)
            if story.final_smiles != target or canonical_smiles_of(replay_story(story)) != target:
                return None
        return target
    except (MoleculeError, DecompositionError, ValueError):
        return None


def canonical_smiles_of(m):
    from .molgraph import write_canonical_smiles

    return write_canonical_smiles(m)


def build_toy_corpus(n=240, seed=0):
    """Deterministic list of ``n`` distinct canonical SMILES."""
    candidates = []
    for tpl in SCAFFOLDS:
        slots = sum("{%d}" % i in tpl for i in range(3))
        for subs in itertools.product(SUBSTITUENTS, repeat=slots):
            candidates.append(_fill(tpl, subs))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(candidates))
    seen, out = set(), []
    for i in order:
        smi = _usable(candidates[i])
        if smi and smi not in seen:
            seen.add(smi)
            out.append(smi)
            if len(out) == n:
                break
    return out


def write_corpus_csv(path, smiles_list):
    from .engine.calibration import synthetic_properties

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["smiles", "logS", "redox", "sascore"])
        for s in smiles_list:
            w.writerow([s, *(f"{v:.6g}" for v in synthetic_properties(s))])


def corpus_path():
    return resources.files("molstory") / "data" / "corpus.csv"


def load_corpus():
    """Records of the bundled toy corpus."""
    with resources.as_file(corpus_path()) as p:
        return ingest_csv(str(p))


def default_model():
    """The generator trained on the bundled corpus, with its vocabulary."""
    from .engine import load_model
    from .io import Vocabulary

    data = resources.files("molstory") / "data"
    with resources.as_file(data / "default.vocab") as v, resources.as_file(data / "default.weights") as w:
        return load_model(str(w), Vocabulary.load(str(v)))


__all__ = ["DatasetRecord", "build_toy_corpus", "corpus_path", "default_model", "load_corpus",
           "write_corpus_csv"]
