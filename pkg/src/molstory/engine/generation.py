"""Conditional generation: start-fragment sampling and the masked story loop."""
import numpy as np

from ..canon import fragment_from_smiles
from ..model import forward_step, initializer_forward, state_features
from ..model.layers import softmax
from ..story import PartialMolecule, Story, StoryStep, valid_actions
from ..molgraph import write_canonical_smiles


def top_k_indices(probs, k):
    """Indices of the ``k`` largest values; ties go to the lower index."""
    probs = np.asarray(probs)
    if not 1 <= k <= len(probs):
        raise ValueError(f"k={k} must lie in [1, {len(probs)}]")
    return np.argsort(-probs, kind="stable")[:k]


def sample_start_fragment(conditions, init_params, k, rng, fragments):
    """Uniform draw among the ``k`` most probable fragments for standardized ``conditions``."""
    probs = initializer_forward(np.asarray(conditions, dtype=float), init_params)
    choice = top_k_indices(probs, k)[int(rng.integers(k))]
    return fragment_from_smiles(fragments[choice])


def _pairs(model):
    cached = getattr(model, "_pairs_cache", None)
    if cached is None or cached[0] is not model.actions_:
        cached = (model.actions_, model.actions_.pairs())
        model._pairs_cache = cached
    return cached[1]


def generate(conditions, model, rng):
    """Grow one molecule for raw ``conditions``; returns ``(MolGraph, Story)``."""
    actions = model.actions_
    pairs = _pairs(model)
    cfg = model.model_config
    provider = model.geometry
    cond = model.scaler_.transform(np.asarray(conditions, dtype=float).reshape(1, -1))[0]
    k = min(model.topk, actions.n_fragments)
    cf0 = sample_start_fragment(cond, model.initializer_.params_, k, rng, actions.fragments)
    pm = PartialMolecule.start(cf0)
    steps = [StoryStep("start", fragment=cf0.smiles)]
    while pm.queue:
        focal = pm.queue[int(rng.integers(len(pm.queue)))]
        if len(pm.atoms) >= model.max_atoms:
            valid = [actions.cauterize]
        else:
            valid = valid_actions(pm, focal, pairs)
        if len(valid) == 1:
            choice = valid[0]
        else:
            feats = state_features(pm, focal, cond, provider, actions)
            p = softmax(forward_step(feats, model.params_, cfg, valid))
            choice = int(rng.choice(len(p), p=p))
        if choice == actions.cauterize:
            pm.cauterize(focal)
            steps.append(StoryStep("cauterize", focal=focal))
        else:
            cf, rep = pairs[choice]
            pm.dock(focal, cf, rep)
            steps.append(StoryStep("dock", focal=focal, fragment=cf.smiles, attachment=rep))
    mol = pm.finalize()
    return mol, Story(steps, write_canonical_smiles(mol))
