"""Prompt density, property predictors and the calibration sweep."""
import csv
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.neighbors import KernelDensity
from sklearn.preprocessing import StandardScaler
from sklearn.utils.validation import check_array, check_is_fitted

from ..canon import fragment_from_smiles
from ..molgraph import atom_fingerprints, parse_smiles
from ..story import decompose
from .generation import generate

AXES = ("logS", "redox", "sascore")


class PromptDensity(BaseEstimator):
    """Gaussian KDE on per-axis standardized conditions."""

    def __init__(self, bandwidth=0.14):
        self.bandwidth = bandwidth

    def fit(self, X):
        X = check_array(X)
        if len(X) == 0:
            raise ValueError("cannot fit a density to an empty dataset")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        self.scaler_ = StandardScaler().fit(X)
        self.kde_ = KernelDensity(kernel="gaussian", bandwidth=self.bandwidth).fit(self.scaler_.transform(X))
        return self

    def score_samples(self, X):
        check_is_fitted(self, "kde_")
        return np.exp(self.kde_.score_samples(self.scaler_.transform(check_array(X))))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))


def kde_fit(conditions, bandwidth=0.14):
    return PromptDensity(bandwidth).fit(conditions)


def kde_score(density, point):
    return float(density.score_samples(np.asarray(point, dtype=float).reshape(1, -1))[0])


# -- synthetic properties ---------------------------------------------------------------

def _fragment_terms(smiles):
    g = fragment_from_smiles(smiles).graph
    els = [a.element for a in g.atoms]
    ring = 1.0 if len(g.bonds) == g.n_atoms else 0.0
    arom = 1.0 if g.aromatic_bonds else 0.0
    n_n, n_o = els.count("N"), els.count("O")
    hetero = sum(e != "C" for e in els)
    return {
        "logS": 0.6 * (n_n + n_o) - 0.35 * ring - 0.5 * arom - 0.15 * (hetero == 0 and not ring),
        "redox": 0.25 * arom + 0.3 * n_n - 0.2 * n_o,
        "sascore": 0.12 + 0.25 * ring + 0.1 * hetero,
    }


_OFFSET = {"logS": 1.0, "redox": 0.0, "sascore": 1.0}


def synthetic_properties(smiles):
    """Weighted fragment-count surrogate values ``(logS, redox, sascore)``."""
    dec = decompose(parse_smiles(smiles))
    out = dict(_OFFSET)
    for cf, _ in dec.placements:
        for k, v in _fragment_terms(cf.smiles).items():
            out[k] += v
    return tuple(round(out[a], 6) for a in AXES)


class FragmentCountPredictor(BaseEstimator, RegressorMixin):
    """Exact synthetic property of a molecule along one axis."""

    def __init__(self, axis="logS"):
        self.axis = axis

    def fit(self, X=None, y=None):
        self.axis_index_ = AXES.index(self.axis)
        return self

    def predict(self, smiles, prompt=None):
        check_is_fitted(self, "axis_index_")
        return np.array([synthetic_properties(s)[self.axis_index_] for s in smiles])


class IdentityPredictor(BaseEstimator):
    """Returns the prompted value; a self-test for the calibration harness."""

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def predict(self, smiles, prompt=None):
        return np.full(len(smiles), float(prompt))


def molecule_bits(smiles, radius=2):
    m = parse_smiles(smiles)
    bits = set()
    for fp in atom_fingerprints(m, radius):
        bits |= fp.bits
    return frozenset(bits)


class NearestNeighborPredictor(BaseEstimator, RegressorMixin):
    """Property of the most similar training molecule (Tanimoto on pooled atom bits)."""

    def __init__(self, radius=2):
        self.radius = radius

    def fit(self, smiles, y):
        self.bits_ = [molecule_bits(s, self.radius) for s in smiles]
        self.y_ = np.asarray(y, dtype=float)
        if len(self.bits_) != len(self.y_) or not self.bits_:
            raise ValueError("need one target per training molecule")
        return self

    def predict(self, smiles, prompt=None):
        check_is_fitted(self, "bits_")
        out = []
        for s in smiles:
            q = molecule_bits(s, self.radius)
            sims = [len(q & b) / max(1, len(q | b)) for b in self.bits_]
            out.append(self.y_[int(np.argmax(sims))])
        return np.array(out)


# -- calibration ------------------------------------------------------------------------------

@dataclass
class CalibrationReport:
    axis: str
    prompts: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    unique_n: np.ndarray
    kde_density: np.ndarray
    novelty_ratio: float
    molecules: list = field(default_factory=list, repr=False)

    def pearson(self):
        ok = np.isfinite(self.mean)
        if ok.sum() < 2:
            return float("nan")
        return float(np.corrcoef(self.prompts[ok], self.mean[ok])[0, 1])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            self.write(fh)

    def write(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["prompt", "mean", "std", "unique_n", "kde_density"])
        for row in zip(self.prompts, self.mean, self.std, self.unique_n, self.kde_density):
            p, m, s, n, d = row
            w.writerow([f"{p:.6g}", f"{m:.6g}", f"{s:.6g}", int(n), f"{d:.6g}"])
        fh.write(f"# axis={self.axis} novelty_ratio={self.novelty_ratio:.6g}\n")


def _prompt_batch(model, cond, n, seed):
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(s) for s in seq.spawn(n)]
    out = []
    for rng in rngs:
        _, story = generate(cond, model, rng)
        out.append((story.final_smiles, story.n_fragments))
    return out


def calibrate(records, axis, model, predictor, n_prompts=30, n_per_prompt=30, seed=0,
              bandwidth=0.14, n_jobs=1):
    """Sweep one condition axis and summarise the predicted property of the generations."""
    if predictor is None:
        raise ValueError("a property predictor is required")
    k = AXES.index(axis)
    X = np.array([r.conditions for r in records], dtype=float)
    known = {s for s in (_canon(r.smiles) for r in records) if s}
    density = kde_fit(X, bandwidth)
    prompts = np.linspace(X[:, k].min(), X[:, k].max(), n_prompts)
    conds = np.tile(X.mean(axis=0), (n_prompts, 1))
    conds[:, k] = prompts
    seeds = np.random.SeedSequence(seed).spawn(n_prompts)
    batches = Parallel(n_jobs=n_jobs)(
        delayed(_prompt_batch)(model, conds[i], n_per_prompt, seeds[i]) for i in range(n_prompts))
    mean, std, uniq, pooled, kept = [], [], [], set(), []
    for i, batch in enumerate(batches):
        smiles = sorted({s for s, nf in batch if nf > 1})
        kept.append(smiles)
        pooled.update(smiles)
        uniq.append(len(smiles))
        if smiles:
            vals = predictor.predict(smiles, prompt=prompts[i])
            mean.append(float(np.mean(vals)))
            std.append(float(np.std(vals)))
        else:
            mean.append(float("nan"))
            std.append(float("nan"))
    novelty = len(pooled - known) / len(pooled) if pooled else 0.0
    return CalibrationReport(axis, prompts, np.array(mean), np.array(std), np.array(uniq),
                             density.score_samples(conds), novelty, kept)


def _canon(smiles):
    from ..molgraph import canonical_smiles

    try:
        return canonical_smiles(smiles)
    except ValueError:
        return None
