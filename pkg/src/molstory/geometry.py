"""Fragment positions and distance matrices for geometry-biased attention.

Atom coordinates come from a light spring embedding rather than a force
field. Each partial molecule is embedded from scratch: classical MDS of the
bond-path distances gives a start that depends only on the graph, then a
fixed number of spring sweeps settles bond lengths and clears contacts. The
same partial molecule therefore gets the same distances whatever order its
fragments were docked in.
"""
import math
from dataclasses import dataclass

import numpy as np

KINDS = ("topological", "force-relaxed", "none")


@dataclass(frozen=True)
class GeometryProvider:
    kind: str = "topological"
    iterations: int = 40
    step: float = 0.05
    repulsion: float = 0.3
    contact: float = 1.6
    angle_weight: float = 1.0
    offset: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown geometry provider {self.kind!r}; expected one of {KINDS}")
        if self.iterations < 0 or self.step <= 0:
            raise ValueError("iterations must be >= 0 and step > 0")

    def embed(self, pm):
        """Set ``pm.coords`` for the current graph (cached until atoms are added)."""
        if self.kind == "none":
            return None
        if pm.coords is not None and len(pm.coords) == len(pm.atoms):
            return pm.coords
        n = len(pm.atoms)
        start = classical_mds(path_distances(n, [pm.neighbors(i) for i in range(n)]))
        # atoms with equal path distances coincide in the MDS start; a seeded
        # offset per canonical class pulls them apart the same way every time
        classes = atom_classes(pm)
        start = canonical_frame(start, classes)
        shift = np.random.default_rng(self.seed).normal(scale=self.offset, size=(max(classes) + 1, 3))
        pm.coords = self._relax(start + shift[classes], self._targets(pm))
        return pm.coords

    def _targets(self, pm):
        n = len(pm.atoms)
        target = np.zeros((n, n))
        weight = np.zeros((n, n))
        for a, b in pm.bonds:
            target[a, b] = target[b, a] = 1.0
            weight[a, b] = weight[b, a] = 1.0
        if self.kind == "force-relaxed":
            for pl in pm.placements:
                size = len(pl.atoms)
                if size < 3:
                    continue
                theta = math.pi * (size - 2) / size
                d13 = 2.0 * math.sin(theta / 2.0)
                for k in range(size):
                    a, c = pl.atoms[k], pl.atoms[(k + 2) % size]
                    if a != c and weight[a, c] == 0.0:
                        target[a, c] = target[c, a] = d13
                        weight[a, c] = weight[c, a] = self.angle_weight
        return target, weight

    def _relax(self, x, targets):
        target, weight = targets
        n = len(x)
        if n < 2:
            return x
        free = (weight == 0.0) & ~np.eye(n, dtype=bool)
        for _ in range(self.iterations):
            diff = x[:, None, :] - x[None, :, :]
            dist = np.sqrt((diff ** 2).sum(-1)) + np.eye(n)
            # spring: d/dx w (d - t)^2 ; repulsion: only inside the contact radius
            coef = 2.0 * weight * (dist - target) / dist
            close = free & (dist < self.contact)
            coef = coef - np.where(close, 2.0 * self.repulsion * (self.contact - dist) / dist, 0.0)
            grad = (coef[:, :, None] * diff).sum(axis=1)
            x = x - self.step * grad
        return x


def atom_classes(pm):
    """A discrete atom labelling that depends only on the partial molecule's graph.

    Colour refinement first; remaining ties are broken by individualizing one
    atom of the first tied class and refining again. Tied atoms are almost
    always symmetry-equivalent, so the choice does not change the geometry.
    """
    n = len(pm.atoms)
    classes = _dense([(a.element, a.charge, a.aromatic, len(pm.neighbors(i))) for i, a in enumerate(pm.atoms)])
    while True:
        while True:
            keys = [(classes[i], tuple(sorted((pm.code(i, j), classes[j]) for j in pm.neighbors(i))))
                    for i in range(n)]
            new = _dense(keys)
            if max(new) == max(classes):
                break
            classes = new
        if max(classes) == n - 1:
            return np.array(classes)
        counts = np.bincount(classes)
        tied = int(np.flatnonzero(counts > 1)[0])
        pick = classes.index(tied)
        classes = _dense([(c, i == pick) for i, c in enumerate(classes)])


def canonical_frame(x, classes, tol=1e-6):
    """Rotate centred ``x`` onto axes spanned by atoms taken in ``classes`` order."""
    axes = []
    for i in np.argsort(classes):
        v = x[i] - sum((x[i] @ a) * a for a in axes)
        norm = np.linalg.norm(v)
        if norm > tol:
            axes.append(v / norm)
            if len(axes) == 2:
                break
    # complete the basis; with at most two axes one unit vector always keeps norm > 0.5
    for e in np.eye(3):
        if len(axes) == 3:
            break
        v = e - sum((e @ a) * a for a in axes)
        if np.linalg.norm(v) > 0.5:
            axes.append(v / np.linalg.norm(v))
    # fix handedness: the first off-plane atom (in class order) sits at positive z
    out = x @ np.array(axes).T
    for i in np.argsort(classes):
        if abs(out[i, 2]) > tol:
            if out[i, 2] < 0:
                out[:, 2] = -out[:, 2]
            break
    return out


def _dense(keys):
    rank = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [rank[k] for k in keys]


def path_distances(n, neighbors):
    """All-pairs bond-path lengths by breadth-first search."""
    d = np.full((n, n), np.inf)
    for root in range(n):
        d[root, root] = 0.0
        frontier = [root]
        while frontier:
            nxt = []
            for a in frontier:
                for b in neighbors[a]:
                    if d[root, b] == np.inf:
                        d[root, b] = d[root, a] + 1.0
                        nxt.append(b)
            frontier = nxt
    return d


def classical_mds(d, dims=3, tol=1e-9):
    """Coordinates whose distances best match ``d`` in at most ``dims`` dimensions.

    Eigen-directions tied with the first discarded one are dropped too, so the
    result does not depend on how a degenerate eigenbasis happens to be chosen.
    """
    n = len(d)
    if n == 1:
        return np.zeros((1, 3))
    j = np.eye(n) - 1.0 / n
    w, v = np.linalg.eigh(-0.5 * j @ (d ** 2) @ j)
    w, v = w[::-1], v[:, ::-1]
    k = min(dims, n)
    if k < n:
        while k > 0 and abs(w[k - 1] - w[k]) <= tol * max(1.0, abs(w[0])):
            k -= 1
    out = np.zeros((n, 3))
    out[:, :k] = v[:, :k] * np.sqrt(np.clip(w[:k], 0.0, None))
    return out


NONE = GeometryProvider("none")


def get_provider(kind="topological", **params):
    return GeometryProvider(kind, **params)


def _atom_coords(pm, provider):
    if provider.kind == "none":
        return None
    provider.embed(pm)
    return pm.coords


def fragment_positions(pm, provider):
    """Centroid of each fragment instance's atoms, shape ``(n_fragments, 3)``."""
    n = len(pm.placements)
    coords = _atom_coords(pm, provider)
    if coords is None:
        return np.zeros((n, 3))
    return np.array([coords[list(pl.atoms)].mean(axis=0) for pl in pm.placements])


def pairwise_distances(positions):
    p = np.asarray(positions, dtype=float)
    if p.ndim != 2 or len(p) == 0:
        raise ValueError("positions must be a non-empty (n, 3) array")
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def attachment_position(pm, focal, provider):
    coords = _atom_coords(pm, provider)
    if coords is None:
        return np.zeros(3)
    return coords[list(pm.tuple_atoms(*focal))].mean(axis=0)


def attachment_distances(pm, focal, positions, provider=None):
    """Distance from every fragment position to the focal attachment centroid."""
    positions = np.asarray(positions, dtype=float)
    if provider is not None and provider.kind == "none" or pm.coords is None:
        return np.zeros(len(positions))
    centre = pm.coords[list(pm.tuple_atoms(*focal))].mean(axis=0)
    return np.sqrt(((positions - centre) ** 2).sum(-1))
