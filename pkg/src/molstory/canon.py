"""Canonical fragment identity and symmetry-aware attachment standardization."""
import math
from dataclasses import dataclass, field
from functools import lru_cache

from .molgraph import (
    AROMATIC, DOUBLE, Atom, Bond, MoleculeError, MolGraph, atom_fingerprints,
    fill_valence, kekulize, parse_smiles, tanimoto, write_canonical_smiles,
)
from .fragmenter import DecompositionError


class MapRecoveryError(MoleculeError):
    pass


def has_aromatic_double(m, i):
    return any(
        k in m.aromatic_bonds and m.bonds[k].order == DOUBLE for _, k in m.neighbors(i)
    )


def fragment_graph(fi, m):
    """Induced subgraph of a fragment, indexed in the fragment's local order.

    Aromatic bonds are taken from the parent's aromatic view and
    re-kekulized inside the fragment, so the result does not depend on the
    parent's Kekulé form. Cut bonds become implicit hydrogens.
    """
    atoms_g = fi.global_atoms
    n = len(atoms_g)
    codes = {}
    for k, key in enumerate(fi.cycle_bond_keys()):
        a, b = key
        bi = m.bond_index(a, b)
        la, lb = fi.global_to_local[a], fi.global_to_local[b]
        codes[(min(la, lb), max(la, lb))] = AROMATIC if bi in m.aromatic_bonds else m.bonds[bi].order
    arom_edges = [e for e, c in codes.items() if c == AROMATIC]
    on_aromatic = {x for e in arom_edges for x in e}
    needs_pi = {k for k, g in enumerate(atoms_g) if k in on_aromatic and has_aromatic_double(m, g)}
    try:
        doubles = kekulize(n, arom_edges, needs_pi)
    except MoleculeError as exc:
        raise DecompositionError(f"fragment {atoms_g} cannot be kekulized alone") from exc
    bonds = []
    used = [0] * n
    for (a, b), c in codes.items():
        order = (DOUBLE if (a, b) in doubles else 1) if c == AROMATIC else c
        bonds.append(Bond(a, b, order))
        used[a] += order
        used[b] += order
    atoms = []
    for k, g in enumerate(atoms_g):
        pa = m.atoms[g]
        v = fill_valence(pa.element, pa.formal_charge, used[k])
        if v is None:
            raise DecompositionError(f"fragment atom {g} exceeds valence")
        atoms.append(Atom(pa.element, pa.formal_charge, False, v - used[k]))
    return MolGraph(atoms, bonds)


def _candidate_maps(n):
    if n == 2:
        return [(0, 1), (1, 0)]
    maps = [tuple((i + s) % n for i in range(n)) for s in range(n)]
    maps += [tuple((-i - s) % n for i in range(n)) for s in range(n)]
    return maps


def recover_cyclic_maps(frag_local, frag_canonical):
    """Every cyclic relabeling local -> canonical allowed by atom similarity.

    Both graphs must list their atoms in cycle order. Maps are enumerated as
    forward shifts ``i -> i + s`` for increasing ``s``, then reversed shifts
    ``i -> -i - s``; ``map[i]`` is the canonical index of local atom ``i``.
    """
    n = frag_local.n_atoms
    if n != frag_canonical.n_atoms or n < 2:
        raise MapRecoveryError("fragments differ in size")
    radius = math.ceil(n / 2)
    fp_local = atom_fingerprints(frag_local, radius)
    fp_canon = atom_fingerprints(frag_canonical, radius)
    sim = [[tanimoto(fl, fc) for fc in fp_canon] for fl in fp_local]
    maps = []
    for cand in _candidate_maps(n):
        if cand not in maps and all(sim[i][cand[i]] == 1.0 for i in range(n)):
            maps.append(cand)
    if not maps:
        raise MapRecoveryError("no cyclic map matches the similarity matrix")
    return maps


def build_standardization_map(maps):
    """``std[i] = min_j F0^-1(F_j(i))`` with ``F0`` the first map."""
    ref = maps[0]
    inv = [0] * len(ref)
    for i, v in enumerate(ref):
        inv[v] = i
    return tuple(min(inv[f[i]] for f in maps) for i in range(len(ref)))


@dataclass(frozen=True)
class CanonicalFragment:
    smiles: str
    size: int
    kind: str
    std_map: tuple
    possible_maps: tuple
    graph: MolGraph = field(compare=False, repr=False)

    def orbit_key(self, atoms):
        return tuple(sorted(self.std_map[a] for a in atoms))

    def ring_bonds(self):
        if self.kind != "ring":
            return []
        return [(k, (k + 1) % self.size) for k in range(self.size)]

    def orbit_keys(self):
        """All arity-1 and arity-2 orbit keys, sorted."""
        keys = {self.orbit_key((k,)) for k in range(self.size)}
        keys.update(self.orbit_key(t) for t in self.ring_bonds())
        return sorted(keys, key=lambda k: (len(k), k))

    def default_representative(self, key):
        if len(key) == 1:
            return min((k,) for k in range(self.size) if self.orbit_key((k,)) == key)
        return min(t for t in self.ring_bonds() if self.orbit_key(t) == key)


@lru_cache(maxsize=None)
def fragment_from_smiles(smiles):
    """Build the :class:`CanonicalFragment` for a canonical fragment string."""
    g = parse_smiles(smiles)
    if g.n_atoms == 2 and len(g.bonds) == 1:
        kind = "bond"
    elif g.n_atoms >= 3 and len(g.bonds) == g.n_atoms and all(g.degree(i) == 2 for i in range(g.n_atoms)):
        kind = "ring"
    else:
        raise MoleculeError(f"{smiles!r} is not a single ring or bond")
    maps = recover_cyclic_maps(g, g)
    return CanonicalFragment(smiles, g.n_atoms, kind, build_standardization_map(maps), tuple(maps), g)


def canonicalize_fragment(fi, m, return_map=False):
    """Canonical identity of a placed fragment.

    With ``return_map`` also returns the first recovered map from local to
    canonical indices.
    """
    local = fragment_graph(fi, m)
    smiles = write_canonical_smiles(local)
    cf = fragment_from_smiles(smiles)
    if not return_map:
        return cf
    return cf, recover_cyclic_maps(local, cf.graph)[0]


@dataclass(frozen=True)
class StandardAttachment:
    atoms: tuple

    @property
    def arity(self):
        return len(self.atoms)

    def __str__(self):
        return ",".join(str(a) for a in self.atoms)


class AttachmentRegistry:
    """First-seen representative per (fragment, orbit key).

    Single writer while a vocabulary is built; read-only afterwards.
    """

    def __init__(self):
        self._reps = {}
        self.counts = {}

    def __contains__(self, item):
        smiles, key = item
        return (smiles, key) in self._reps

    def items(self):
        return self._reps.items()

    def register(self, cf, atoms, count=True):
        key = (cf.smiles, cf.orbit_key(atoms))
        if key not in self._reps:
            self._reps[key] = tuple(atoms)
        if count:
            self.counts[key] = self.counts.get(key, 0) + 1
        return StandardAttachment(self._reps[key])

    def lookup(self, cf, atoms):
        key = (cf.smiles, cf.orbit_key(atoms))
        rep = self._reps.get(key)
        if rep is None:
            rep = cf.default_representative(key[1])
        return StandardAttachment(rep)

    def set_representative(self, smiles, key, rep, count=0):
        self._reps[(smiles, tuple(key))] = tuple(rep)
        if count:
            self.counts[(smiles, tuple(key))] = count


def standardize_attachment(canonical_atoms, cf, registry):
    return registry.register(cf, tuple(canonical_atoms))
