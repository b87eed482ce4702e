"""Geometry-aware autoregressive transformer over fragments."""
import math
from dataclasses import dataclass

import numpy as np

from ..canon import fragment_from_smiles
from ..geometry import attachment_distances, fragment_positions, pairwise_distances
from ..molgraph import MoleculeError
from .layers import (
    NEG_INF, dropout_backward, dropout_forward, gelu_backward, gelu_forward,
    layernorm_backward, layernorm_forward, linear_backward, linear_forward,
    log_softmax, mha_backward, mha_forward, softmax,
)

CAUTERIZE = "CAUTERIZE"


class ActionVocabulary:
    """Ordered ``(fragment smiles, representative tuple)`` actions, CAUTERIZE last.

    Also owns the fragment index (embedding rows) and the attachment-type
    index, keyed by ``(fragment smiles, orbit key)``; type 0 is unknown.
    """

    def __init__(self, fragments, actions):
        self.fragments = list(fragments)
        self.fragment_index = {s: i for i, s in enumerate(self.fragments)}
        self.entries = [(s, tuple(t)) for s, t in actions]
        if len(set(self.entries)) != len(self.entries):
            raise ValueError("duplicate vocabulary entries")
        self.index = {e: i for i, e in enumerate(self.entries)}
        self.cauterize = len(self.entries)
        self._pairs = None
        types = []
        for s in self.fragments:
            types.extend((s, key) for key in fragment_from_smiles(s).orbit_keys())
        self.att_types = {t: i + 1 for i, t in enumerate(types)}

    def __len__(self):
        return len(self.entries) + 1

    @property
    def n_fragments(self):
        return len(self.fragments)

    @property
    def n_att_types(self):
        return len(self.att_types) + 1

    def action(self, idx):
        return CAUTERIZE if idx == self.cauterize else self.entries[idx]

    def fragment_id(self, smiles):
        try:
            return self.fragment_index[smiles]
        except KeyError:
            raise MoleculeError(f"fragment {smiles} is not in the vocabulary") from None

    def att_type(self, smiles, tup):
        key = fragment_from_smiles(smiles).orbit_key(tup)
        return self.att_types.get((smiles, key), 0)

    def pairs(self):
        if self._pairs is None:
            self._pairs = [(fragment_from_smiles(s), t) for s, t in self.entries]
        return self._pairs


@dataclass(frozen=True)
class ModelConfig:
    d_f: int = 256
    d_a: int = 64
    heads: int = 8
    layers: int = 3
    ff: int = 512
    n_cond: int = 3
    dropout: float = 0.3
    geometry_scale: float = 1.0
    freeze_geometry: bool = False

    def __post_init__(self):
        if self.d_f % self.heads:
            raise ValueError("d_f must be divisible by heads")
        if self.layers < 1:
            raise ValueError("need at least one transformer layer")


def _uniform(rng, fan_in, shape):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(config, n_fragments, n_att_types, n_actions, seed=0):
    rng = np.random.default_rng(seed)
    d, c = config.d_f, config.n_cond
    p = {
        "frag_emb": rng.uniform(-1.0, 1.0, size=(n_fragments, d)),
        "att_emb": rng.uniform(-1.0, 1.0, size=(n_att_types, config.d_a)),
        "proj_w": _uniform(rng, 3 + c, (3 + c, d)),
        "proj_b": np.zeros(d),
    }
    for l in range(config.layers):
        pre = f"l{l}."
        for name in ("ln1", "ln2"):
            p[pre + name + "_g"] = np.ones(d)
            p[pre + name + "_b"] = np.zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            p[pre + name] = _uniform(rng, d, (d, d))
            p[pre + "b" + name[1]] = np.zeros(d)
        p[pre + "ff_w1"] = _uniform(rng, d, (d, config.ff))
        p[pre + "ff_b1"] = np.zeros(config.ff)
        p[pre + "ff_w2"] = _uniform(rng, config.ff, (config.ff, d))
        p[pre + "ff_b2"] = np.zeros(d)
    p["lnf_g"] = np.ones(d)
    p["lnf_b"] = np.zeros(d)
    width = d + 3 + config.d_a + c
    p["head_w"] = _uniform(rng, width, (width, n_actions))
    p["head_b"] = np.zeros(n_actions)
    p["geometry_scale"] = np.array(config.geometry_scale)
    return p


# -- features ---------------------------------------------------------------------

@dataclass
class StepBatch:
    frag: np.ndarray  # (B, N) fragment ids
    mask: np.ndarray  # (B, N) True on real fragments
    sat: np.ndarray  # (B, N, 3) scaled dock saturations
    cond: np.ndarray  # (B, C) standardized conditions
    dist: np.ndarray  # (B, N, N) fragment distances
    focal: np.ndarray  # (B,) focal fragment index
    att_dist: np.ndarray  # (B, N) distances to the focal attachment
    att_type: np.ndarray  # (B,) attachment-type ids
    labels: np.ndarray = None  # (B,) action ids

    def __len__(self):
        return len(self.focal)


def state_features(pm, focal, conditions, provider, vocab):
    """Model inputs for one (partial molecule, focal attachment) state."""
    inst, tup = focal
    pos = fragment_positions(pm, provider)
    sat = np.array([pm.saturation(i) for i in range(pm.n_fragments)]) * 2.0 - 1.0
    smiles = pm.placements[inst].fragment.smiles
    return {
        "frag": np.array([vocab.fragment_id(pl.fragment.smiles) for pl in pm.placements]),
        "sat": sat,
        "cond": np.asarray(conditions, dtype=float),
        "dist": pairwise_distances(pos),
        "focal": inst,
        "att_dist": attachment_distances(pm, focal, pos, provider),
        "att_type": vocab.att_type(smiles, tup),
    }


def collate(samples, labels=None):
    b = len(samples)
    n = max(len(s["frag"]) for s in samples)
    batch = StepBatch(
        frag=np.zeros((b, n), dtype=np.int64),
        mask=np.zeros((b, n), dtype=bool),
        sat=np.zeros((b, n, 3)),
        cond=np.stack([s["cond"] for s in samples]),
        dist=np.zeros((b, n, n)),
        focal=np.array([s["focal"] for s in samples], dtype=np.int64),
        att_dist=np.zeros((b, n)),
        att_type=np.array([s["att_type"] for s in samples], dtype=np.int64),
        labels=None if labels is None else np.asarray(labels, dtype=np.int64),
    )
    for i, s in enumerate(samples):
        k = len(s["frag"])
        batch.frag[i, :k] = s["frag"]
        batch.mask[i, :k] = True
        batch.sat[i, :k] = s["sat"]
        batch.dist[i, :k, :k] = s["dist"]
        batch.att_dist[i, :k] = s["att_dist"]
    return batch


# -- network ----------------------------------------------------------------------

def _block_ffn(x, p, pre, cfg, rng):
    h, c_ln = layernorm_forward(x, p[pre + "ln2_g"], p[pre + "ln2_b"])
    u, c1 = linear_forward(h, p[pre + "ff_w1"], p[pre + "ff_b1"])
    g, cg = gelu_forward(u)
    y, c2 = linear_forward(g, p[pre + "ff_w2"], p[pre + "ff_b2"])
    y, keep = dropout_forward(y, cfg.dropout, rng)
    return x + y, (c_ln, c1, cg, c2, keep)


def _block_ffn_backward(dx, cache, pre, grads):
    c_ln, c1, cg, c2, keep = cache
    dy = dropout_backward(dx, keep)
    dg, grads[pre + "ff_w2"], grads[pre + "ff_b2"] = linear_backward(dy, c2)
    du = gelu_backward(dg, cg)
    dh, grads[pre + "ff_w1"], grads[pre + "ff_b1"] = linear_backward(du, c1)
    dln, grads[pre + "ln2_g"], grads[pre + "ln2_b"] = layernorm_backward(dh, c_ln)
    return dx + dln


def forward(batch, params, cfg, rng=None):
    """Logits ``(B, |A|+1)``; ``rng`` enables dropout (training mode)."""
    p = params
    a = float(p["geometry_scale"])
    B, N = batch.frag.shape
    rows = np.arange(B)
    caches = {}
    side = np.concatenate([batch.sat, np.broadcast_to(batch.cond[:, None, :], (B, N, batch.cond.shape[1]))], -1)
    proj, caches["proj"] = linear_forward(side, p["proj_w"], p["proj_b"])
    x = p["frag_emb"][batch.frag] + proj
    key_mask = np.broadcast_to(batch.mask[:, None, :], (B, N, N))
    for l in range(cfg.layers - 1):
        pre = f"l{l}."
        h, c_ln = layernorm_forward(x, p[pre + "ln1_g"], p[pre + "ln1_b"])
        y, c_att = mha_forward(h, h, p, pre, cfg.heads, batch.dist, a, key_mask)
        y, keep = dropout_forward(y, cfg.dropout, rng)
        x = x + y
        x, c_ffn = _block_ffn(x, p, pre, cfg, rng)
        caches[l] = (c_ln, c_att, keep, c_ffn)
    pre = f"l{cfg.layers - 1}."
    h, c_ln = layernorm_forward(x, p[pre + "ln1_g"], p[pre + "ln1_b"])
    hq = h[rows, batch.focal][:, None, :]
    y, c_att = mha_forward(hq, h, p, pre, cfg.heads, batch.att_dist[:, None, :], a, batch.mask[:, None, :])
    y, keep = dropout_forward(y, cfg.dropout, rng)
    xf = x[rows, batch.focal][:, None, :] + y
    xf, c_ffn = _block_ffn(xf, p, pre, cfg, rng)
    caches["last"] = (c_ln, c_att, keep, c_ffn)
    hf, caches["lnf"] = layernorm_forward(xf[:, 0], p["lnf_g"], p["lnf_b"])
    focal_sat = batch.sat[rows, batch.focal]
    z = np.concatenate([hf, focal_sat, p["att_emb"][batch.att_type], batch.cond], -1)
    logits, caches["head"] = linear_forward(z, p["head_w"], p["head_b"])
    caches["shape"] = (B, N)
    return logits, caches


def backward(dlogits, batch, params, cfg, caches):
    p = params
    B, N = caches["shape"]
    rows = np.arange(B)
    d = cfg.d_f
    grads = {}
    dz, grads["head_w"], grads["head_b"] = linear_backward(dlogits, caches["head"])
    dhf = dz[:, :d]
    datt = dz[:, d + 3:d + 3 + cfg.d_a]
    grads["att_emb"] = np.zeros_like(p["att_emb"])
    np.add.at(grads["att_emb"], batch.att_type, datt)
    dxf, grads["lnf_g"], grads["lnf_b"] = layernorm_backward(dhf, caches["lnf"])
    dxf = dxf[:, None, :]
    dscale = 0.0
    pre = f"l{cfg.layers - 1}."
    c_ln, c_att, keep, c_ffn = caches["last"]
    dxf = _block_ffn_backward(dxf, c_ffn, pre, grads)
    dy = dropout_backward(dxf, keep)
    dhq, dh, ds = mha_backward(dy, c_att, pre, grads)
    dscale += ds
    dh = dh.copy()
    dh[rows, batch.focal] += dhq[:, 0]
    dx, grads[pre + "ln1_g"], grads[pre + "ln1_b"] = layernorm_backward(dh, c_ln)
    dx[rows, batch.focal] += dxf[:, 0]
    for l in reversed(range(cfg.layers - 1)):
        pre = f"l{l}."
        c_ln, c_att, keep, c_ffn = caches[l]
        dx = _block_ffn_backward(dx, c_ffn, pre, grads)
        dy = dropout_backward(dx, keep)
        dh, _, ds = mha_backward(dy, c_att, pre, grads)
        dscale += ds
        dln, grads[pre + "ln1_g"], grads[pre + "ln1_b"] = layernorm_backward(dh, c_ln)
        dx = dx + dln
    grads["frag_emb"] = np.zeros_like(p["frag_emb"])
    np.add.at(grads["frag_emb"], batch.frag[batch.mask], dx[batch.mask])
    dside, grads["proj_w"], grads["proj_b"] = linear_backward(dx, caches["proj"])
    grads["geometry_scale"] = np.array(0.0 if cfg.freeze_geometry else dscale)
    return grads


def story_loss(batch, params, cfg, rng=None):
    """Mean next-action negative log-likelihood and its gradients."""
    logits, caches = forward(batch, params, cfg, rng)
    B = len(batch)
    lp = log_softmax(logits)
    loss = -float(lp[np.arange(B), batch.labels].mean())
    dlogits = softmax(logits)
    dlogits[np.arange(B), batch.labels] -= 1.0
    grads = backward(dlogits / B, batch, params, cfg, caches)
    return loss, grads


def forward_step(features, params, cfg, valid=None):
    """Logits for a single state (inference, dropout off).

    ``valid`` optionally lists allowed action indices; the rest are masked.
    """
    logits = forward(collate([features]), params, cfg)[0][0]
    if valid is not None:
        masked = np.full_like(logits, NEG_INF)
        masked[valid] = logits[valid]
        logits = masked
    return logits


def accuracy(batch, params, cfg):
    logits = forward(batch, params, cfg)[0]
    return float((logits.argmax(axis=1) == batch.labels).mean())
