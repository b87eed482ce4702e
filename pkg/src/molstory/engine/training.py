"""Estimators: the story transformer and the start-fragment initializer."""
import logging
from dataclasses import asdict, fields

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.preprocessing import StandardScaler
from sklearn.utils.validation import check_array, check_is_fitted

from ..canon import fragment_from_smiles
from ..fragmenter import DecompositionError
from ..geometry import GeometryProvider
from ..io import build_vocabulary
from ..molgraph import MoleculeError, parse_smiles
from ..model import (
    AdamState, ModelConfig, adam_step, collate, forward, init_initializer, init_params,
    initializer_forward, initializer_loss, state_features, story_loss,
)
from ..story import decompose, iter_story_states, unroll_story
from .config import TrainConfig

log = logging.getLogger(__name__)


def action_label(step, registry, actions):
    if step.action == "cauterize":
        return actions.cauterize
    cf = fragment_from_smiles(step.fragment)
    rep = registry.lookup(cf, step.attachment).atoms
    try:
        return actions.index[(step.fragment, rep)]
    except KeyError:
        raise MoleculeError(f"action ({step.fragment}, {rep}) is not in the vocabulary") from None


def story_samples(dec, conditions, vocabulary, actions, provider, rng):
    """Unroll one fresh story and return ``(story, features, labels)``."""
    story = unroll_story(dec.mol, rng, dec)
    feats, labels = [], []
    for pm, step in iter_story_states(story):
        if step.action == "start":
            actions.fragment_id(step.fragment)
            continue
        feats.append(state_features(pm, step.focal, conditions, provider, actions))
        labels.append(action_label(step, vocabulary.registry, actions))
    return story, feats, labels


def fragment_sets(decs, actions):
    y = np.zeros((len(decs), actions.n_fragments))
    for i, dec in enumerate(decs):
        for cf, _ in dec.placements:
            y[i, actions.fragment_id(cf.smiles)] = 1.0
    return y


class FragmentInitializer(ClassifierMixin, BaseEstimator):
    """Multi-label classifier from standardized conditions to fragment presence."""

    def __init__(self, hidden=512, epochs=300, learning_rate=1e-3, seed=0):
        self.hidden = hidden
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, Y):
        X = check_array(X)
        Y = check_array(Y)
        if len(X) != len(Y):
            raise ValueError("X and Y lengths differ")
        self.params_ = init_initializer(X.shape[1], Y.shape[1], self.hidden, self.seed)
        state = AdamState(self.params_)
        self.loss_curve_ = []
        for _ in range(self.epochs):
            loss, grads = initializer_loss(X, Y, self.params_)
            adam_step(self.params_, grads, state, self.learning_rate)
            self.loss_curve_.append(loss)
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        return initializer_forward(check_array(X), self.params_)

    def predict(self, X):
        return (self.predict_proba(X) > 0.5).astype(int)


class StoryGenerator(BaseEstimator):
    """Conditional fragment-story model.

    ``fit`` takes SMILES and raw ``(logS, redox, SA)`` conditions; every
    epoch draws a new random story per molecule.
    """

    def __init__(self, epochs=100, learning_rate=1e-4, batch_size=32, dropout=0.3, topk=3,
                 provider="topological", geometry_scale=1.0, freeze_geometry=False, seed=0,
                 train_fraction=0.7, n_validation=100, d_f=256, d_a=64, heads=8, layers=3,
                 ff=512, init_hidden=512, init_epochs=300, init_learning_rate=1e-3,
                 max_atoms=40, max_steps=0, lr_schedule="constant"):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.dropout = dropout
        self.topk = topk
        self.provider = provider
        self.geometry_scale = geometry_scale
        self.freeze_geometry = freeze_geometry
        self.seed = seed
        self.train_fraction = train_fraction
        self.n_validation = n_validation
        self.d_f = d_f
        self.d_a = d_a
        self.heads = heads
        self.layers = layers
        self.ff = ff
        self.init_hidden = init_hidden
        self.init_epochs = init_epochs
        self.init_learning_rate = init_learning_rate
        self.max_atoms = max_atoms
        self.max_steps = max_steps
        self.lr_schedule = lr_schedule

    @classmethod
    def from_config(cls, config):
        return cls(**asdict(config))

    @property
    def config(self):
        return TrainConfig(**{f.name: getattr(self, f.name) for f in fields(TrainConfig)})

    @property
    def model_config(self):
        return ModelConfig(self.d_f, self.d_a, self.heads, self.layers, self.ff, 3,
                           self.dropout, self.geometry_scale, self.freeze_geometry)

    @property
    def geometry(self):
        return GeometryProvider(self.provider)

    def _decompose(self, smiles):
        decs, keep = [], []
        for i, s in enumerate(smiles):
            try:
                decs.append(decompose(parse_smiles(s)))
                keep.append(i)
            except (MoleculeError, DecompositionError) as exc:
                log.warning("skipping %s: %s", s, exc)
        return decs, keep

    def _epoch_samples(self, decs, cond, rng):
        feats, labels, skipped = [], [], 0
        for dec, c in zip(decs, cond):
            try:
                _, f, y = story_samples(dec, c, self.vocabulary_, self.actions_, self.geometry, rng)
            except (MoleculeError, DecompositionError):
                skipped += 1
                continue
            feats.extend(f)
            labels.extend(y)
        return feats, labels, skipped

    def _accuracy(self, feats, labels):
        if not feats:
            return float("nan")
        hits = 0
        for i in range(0, len(feats), 256):
            batch = collate(feats[i:i + 256], labels[i:i + 256])
            logits = forward(batch, self.params_, self.model_config)[0]
            hits += int((logits.argmax(axis=1) == batch.labels).sum())
        return hits / len(feats)

    def _lr(self, progress):
        """Learning rate at ``progress`` in [0, 1] of the run."""
        if self.lr_schedule == "constant":
            return self.learning_rate
        if self.lr_schedule == "cosine":
            frac = min(1.0, progress)
            return self.learning_rate * 0.5 * (1.0 + np.cos(np.pi * frac))
        raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")

    def fit(self, smiles, conditions, validation=None, vocabulary=None):
        conditions = check_array(conditions)
        if len(smiles) != len(conditions) or conditions.shape[1] != 3:
            raise ValueError("need one (logS, redox, SA) row per molecule")
        decs, keep = self._decompose(smiles)
        if not decs:
            raise ValueError("no usable training molecules")
        conditions = conditions[keep]
        self.vocabulary_ = vocabulary or build_vocabulary([smiles[i] for i in keep])
        self.actions_ = self.vocabulary_.action_vocabulary()
        self.scaler_ = StandardScaler().fit(conditions)
        self.n_features_in_ = 3
        cond = self.scaler_.transform(conditions)
        ss = np.random.SeedSequence(self.seed)
        s_params, s_init, s_story, s_drop = ss.spawn(4)
        cfg = self.model_config
        self.params_ = init_params(cfg, self.actions_.n_fragments, self.actions_.n_att_types,
                                   len(self.actions_), seed=s_params)
        self.initializer_ = FragmentInitializer(self.init_hidden, self.init_epochs,
                                                self.init_learning_rate, s_init.generate_state(1)[0])
        self.initializer_.fit(cond, fragment_sets(decs, self.actions_))
        story_rng = np.random.default_rng(s_story)
        drop_rng = np.random.default_rng(s_drop)
        val = None
        if validation is not None:
            vdecs, vkeep = self._decompose(validation[0])
            val = (vdecs, self.scaler_.transform(check_array(validation[1])[vkeep]))
        state = AdamState(self.params_)
        frozen = ("geometry_scale",) if self.freeze_geometry else ()
        self.history_ = []
        self.n_steps_ = 0
        for epoch in range(self.epochs):
            feats, labels, skipped = self._epoch_samples(decs, cond, story_rng)
            order = story_rng.permutation(len(feats))
            losses = []
            for i in range(0, len(order), self.batch_size):
                if self.max_steps and self.n_steps_ >= self.max_steps:
                    break
                idx = order[i:i + self.batch_size]
                batch = collate([feats[j] for j in idx], [labels[j] for j in idx])
                loss, grads = story_loss(batch, self.params_, cfg, drop_rng if cfg.dropout else None)
                progress = self.n_steps_ / self.max_steps if self.max_steps else (epoch + i / len(order)) / self.epochs
                adam_step(self.params_, grads, state, self._lr(progress), frozen=frozen)
                self.n_steps_ += 1
                losses.append(loss)
            row = {"epoch": epoch + 1, "loss": float(np.mean(losses)) if losses else float("nan"),
                   "train_accuracy": self._accuracy(feats, labels), "skipped": skipped,
                   "steps": self.n_steps_}
            if val is not None:
                vf, vl, vs = self._epoch_samples(val[0], val[1], story_rng)
                row["valid_accuracy"] = self._accuracy(vf, vl)
                row["valid_skipped"] = vs
            self.history_.append(row)
            log.info("epoch %d %s", epoch + 1, row)
            if self.max_steps and self.n_steps_ >= self.max_steps:
                break
        return self

    def score(self, smiles, conditions, seed=None):
        """Next-action accuracy over freshly sampled stories (every step counts)."""
        check_is_fitted(self, "params_")
        decs, keep = self._decompose(smiles)
        cond = self.scaler_.transform(check_array(conditions)[keep])
        rng = np.random.default_rng(self.seed if seed is None else seed)
        feats, labels, _ = self._epoch_samples(decs, cond, rng)
        return self._accuracy(feats, labels)

    def generate(self, conditions, seed=None):
        from .generation import generate

        check_is_fitted(self, "params_")
        return generate(conditions, self, rng=np.random.default_rng(seed))

    def sample(self, conditions, n, seed=None):
        from .generation import generate

        check_is_fitted(self, "params_")
        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
        return [generate(conditions, self, rng=r) for r in rngs]


def split_indices(n, config):
    """Seeded train / validation / test index split."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    order = rng.permutation(n)
    n_train = max(1, int(round(config.train_fraction * n)))
    n_val = min(config.n_validation, max(0, (n - n_train) // 2))
    return order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]


def train(records, config):
    """Split, build the vocabulary on the training part, fit; returns ``(model, metrics)``."""
    tr, va, te = split_indices(len(records), config)
    pick = lambda idx: ([records[i].smiles for i in idx], np.array([records[i].conditions for i in idx]).reshape(-1, 3))
    model = StoryGenerator.from_config(config)
    vs = pick(va) if len(va) else None
    model.fit(*pick(tr), validation=vs)
    metrics = {"history": model.history_, "split": (len(tr), len(va), len(te))}
    if len(te):
        metrics["test_accuracy"] = model.score(*pick(te))
    return model, metrics


def save_model(model, path):
    """Write both networks and the condition scaler to one weight file."""
    from ..model import save_weights

    check_is_fitted(model, "params_")
    tensors = dict(model.params_)
    tensors.update({"init." + k: v for k, v in model.initializer_.params_.items()})
    tensors["scaler.mean"] = model.scaler_.mean_
    tensors["scaler.scale"] = model.scaler_.scale_
    meta = {k: str(v) for k, v in asdict(model.config).items()}
    save_weights(path, tensors, meta)


def load_model(path, vocabulary):
    """Rebuild a fitted :class:`StoryGenerator` from a weight file and its vocabulary."""
    from ..model import load_weights

    tensors, meta = load_weights(path)
    config = TrainConfig.from_text("".join(f"{k}={v}\n" for k, v in meta.items()))
    model = StoryGenerator.from_config(config)
    model.vocabulary_ = vocabulary
    model.actions_ = vocabulary.action_vocabulary()
    init = {k[5:]: tensors.pop(k) for k in list(tensors) if k.startswith("init.")}
    scaler = StandardScaler()
    scaler.mean_ = tensors.pop("scaler.mean")
    scaler.scale_ = tensors.pop("scaler.scale")
    scaler.var_ = scaler.scale_ ** 2
    scaler.n_features_in_ = len(scaler.mean_)
    model.scaler_ = scaler
    model.params_ = tensors
    if model.params_["head_b"].shape[0] != len(model.actions_) or \
            model.params_["frag_emb"].shape[0] != model.actions_.n_fragments:
        raise ValueError("weights do not match the vocabulary")
    model.initializer_ = FragmentInitializer(config.init_hidden, config.init_epochs, config.init_learning_rate)
    model.initializer_.params_ = init
    model.initializer_.n_features_in_ = 3
    model.n_features_in_ = 3
    return model
