"""Molecular stories: growing a molecule fragment by fragment.

A :class:`PartialMolecule` keeps an aromatic view of the growing graph
(aromatic bonds stay aromatic, and each aromatic atom remembers whether it
owes a double bond to its ring system). Docking merges atoms of an incoming
canonical fragment into the focal attachment; the Kekulé form is only
chosen when the molecule is finalized.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .canon import canonicalize_fragment, fragment_from_smiles, has_aromatic_double
from .fragmenter import DecompositionError, derive_attachments, generate_fragments
from .molgraph import (
    AROMATIC, DOUBLE, SINGLE, Atom, Bond, KekulizeError, MoleculeError, MolGraph,
    fill_valence, free_valence, kekulize, max_valence, write_canonical_smiles,
)

CAUTERIZE = "CAUTERIZE"


class DockError(MoleculeError):
    pass


class StoryError(MoleculeError):
    pass


def _weight(code):
    return 1 if code == AROMATIC else code


@dataclass
class _PAtom:
    element: str
    charge: int
    aromatic: bool
    needs_pi: bool


@lru_cache(maxsize=None)
def _fragment_view(smiles):
    """Aromatic view of a canonical fragment: atom tuples and bond codes."""
    g = fragment_from_smiles(smiles).graph
    atoms = tuple(
        (a.element, a.formal_charge, a.is_aromatic, has_aromatic_double(g, i))
        for i, a in enumerate(g.atoms)
    )
    bonds = {}
    for k, b in enumerate(g.bonds):
        bonds[b.key] = g.bond_code(k)
    return atoms, bonds


@dataclass
class Placement:
    fragment: object
    atoms: tuple  # partial-molecule atom index for each canonical local index


@dataclass
class _Plan:
    merge: dict
    merged_attrs: dict
    shared_code: int = None


class PartialMolecule:
    """Growing molecule with its exploration queue.

    Queue entries are ``(instance, tuple)`` where ``tuple`` holds canonical
    local indices of one atom or one ring bond of that instance.
    """

    def __init__(self):
        self.atoms = []
        self.bonds = {}
        self.placements = []
        self.queue = []
        self.cauterized = set()
        self.coords = None
        self._adj = []

    @classmethod
    def start(cls, cf):
        pm = cls()
        view_atoms, view_bonds = _fragment_view(cf.smiles)
        for el, q, ar, npi in view_atoms:
            pm._add_atom(_PAtom(el, q, ar, npi))
        for (a, b), c in view_bonds.items():
            pm._add_bond(a, b, c)
        pm.placements.append(Placement(cf, tuple(range(cf.size))))
        pm._enqueue(0)
        return pm

    def copy(self):
        new = PartialMolecule()
        new.atoms = [_PAtom(a.element, a.charge, a.aromatic, a.needs_pi) for a in self.atoms]
        new.bonds = dict(self.bonds)
        new.placements = list(self.placements)
        new.queue = list(self.queue)
        new.cauterized = set(self.cauterized)
        new.coords = None if self.coords is None else self.coords.copy()
        new._adj = [list(x) for x in self._adj]
        return new

    # -- graph bookkeeping -------------------------------------------------
    def _add_atom(self, atom):
        self.atoms.append(atom)
        self._adj.append([])
        return len(self.atoms) - 1

    def _add_bond(self, a, b, code):
        key = (min(a, b), max(a, b))
        if key not in self.bonds:
            self._adj[a].append(b)
            self._adj[b].append(a)
        self.bonds[key] = code

    def neighbors(self, i):
        return self._adj[i]

    def code(self, a, b):
        return self.bonds.get((min(a, b), max(a, b)))

    def used_valence(self, i):
        s = sum(_weight(self.bonds[(min(i, j), max(i, j))]) for j in self._adj[i])
        return s + (1 if self.atoms[i].needs_pi else 0)

    def free_valence(self, i):
        a = self.atoms[i]
        return max_valence(a.element, a.charge) - self.used_valence(i)

    @property
    def n_fragments(self):
        return len(self.placements)

    # -- attachment points --------------------------------------------------
    def structural_tuples(self, inst):
        cf = self.placements[inst].fragment
        return [(k,) for k in range(cf.size)] + cf.ring_bonds()

    def tuple_atoms(self, inst, tup):
        atoms = self.placements[inst].atoms
        return tuple(atoms[t] for t in tup)

    def _open(self, inst, tup):
        return all(self.free_valence(a) >= 1 for a in self.tuple_atoms(inst, tup))

    def _enqueue(self, inst):
        present = set(self.queue)
        for tup in self.structural_tuples(inst):
            entry = (inst, tup)
            if entry not in present and entry not in self.cauterized and self._open(inst, tup):
                self.queue.append(entry)

    def _prune(self):
        self.queue = [e for e in self.queue if self._open(*e)]

    def saturation(self, inst):
        """Raw (in use, free, cauterized) fractions over the instance's attachment points."""
        tuples = self.structural_tuples(inst)
        queued = set(self.queue)
        free = sum((inst, t) in queued for t in tuples)
        caut = sum((inst, t) in self.cauterized for t in tuples)
        total = len(tuples)
        return ((total - free - caut) / total, free / total, caut / total)

    # -- docking ----------------------------------------------------------------
    def plan_dock(self, focal, cf, in_tuple):
        """Validate a dock without mutating; raises DockError when illegal."""
        inst, ftup = focal
        in_tuple = tuple(in_tuple)
        if len(in_tuple) != len(ftup):
            raise DockError("attachment arity mismatch")
        if any(not 0 <= k < cf.size for k in in_tuple):
            raise DockError("attachment outside fragment")
        if len(in_tuple) == 2 and (min(in_tuple), max(in_tuple)) not in _fragment_view(cf.smiles)[1]:
            raise DockError("arity-2 attachment must be a bond")
        fp = self.tuple_atoms(inst, ftup)
        orientations = [in_tuple] if len(in_tuple) == 1 else [in_tuple, in_tuple[::-1]]
        err = None
        for orient in orientations:
            try:
                return self._plan(fp, cf, orient)
            except DockError as exc:
                err = err or exc
        raise err

    def _plan(self, fp, cf, orient):
        view_atoms, view_bonds = _fragment_view(cf.smiles)
        merge = dict(zip(orient, fp))
        attrs = {}
        shared_code = None
        absorbed = False
        if len(orient) == 2:
            own = self.code(*fp)
            inc = view_bonds[(min(orient), max(orient))]
            if own == inc:
                shared_code = own
            elif {own, inc} == {AROMATIC, DOUBLE}:
                shared_code, absorbed = AROMATIC, True
            else:
                raise DockError("fused bond orders disagree")
        for k, p in merge.items():
            el, q, ar, npi = view_atoms[k]
            mine = self.atoms[p]
            if (el, q) != (mine.element, mine.charge):
                raise DockError("element mismatch at attachment")
            if mine.needs_pi and npi and not (shared_code == AROMATIC and not absorbed):
                raise DockError("merged atom would need two double bonds")
            attrs[p] = _PAtom(el, q, mine.aromatic or ar, mine.needs_pi or npi or absorbed)
        for k, p in merge.items():
            used = 0
            for j in self._adj[p]:
                c = self.bonds[(min(p, j), max(p, j))]
                if shared_code is not None and j in fp:
                    c = shared_code
                used += _weight(c)
            for (a, b), c in view_bonds.items():
                if k in (a, b):
                    other = b if a == k else a
                    if other in merge and shared_code is not None:
                        continue
                    used += _weight(c)
            used += 1 if attrs[p].needs_pi else 0
            if used > max_valence(el := attrs[p].element, attrs[p].charge) or fill_valence(el, attrs[p].charge, used) is None:
                raise DockError("valence violation at attachment")
        plan = _Plan(merge, attrs, shared_code)
        if any(a.aromatic for a in attrs.values()) or shared_code == AROMATIC:
            self._check_kekule(cf, plan)
        return plan

    def _check_kekule(self, cf, plan):
        view_atoms, view_bonds = _fragment_view(cf.smiles)
        n_old = len(self.atoms)
        index = {}
        nxt = n_old
        for k in range(cf.size):
            if k in plan.merge:
                index[k] = plan.merge[k]
            else:
                index[k] = nxt
                nxt += 1
        needs = set()
        for i, a in enumerate(self.atoms):
            if (plan.merged_attrs[i].needs_pi if i in plan.merged_attrs else a.needs_pi):
                needs.add(i)
        for k, (_, _, _, npi) in enumerate(view_atoms):
            if k not in plan.merge and npi:
                needs.add(index[k])
        edges = {key for key, c in self.bonds.items() if c == AROMATIC}
        for (a, b), c in view_bonds.items():
            key = (min(index[a], index[b]), max(index[a], index[b]))
            if c == AROMATIC or (key in self.bonds and plan.shared_code == AROMATIC):
                edges.add(key)
        try:
            kekulize(nxt, sorted(edges), needs)
        except KekulizeError as exc:
            raise DockError("docked system cannot be kekulized") from exc

    def dock(self, focal, cf, in_tuple, plan=None):
        """Dock ``cf`` at ``focal`` in place; returns the new instance index."""
        if focal not in self.queue:
            raise DockError(f"focal {focal} is not in the queue")
        if plan is None:
            plan = self.plan_dock(focal, cf, in_tuple)
        view_atoms, view_bonds = _fragment_view(cf.smiles)
        index = {}
        for k in range(cf.size):
            if k in plan.merge:
                index[k] = plan.merge[k]
            else:
                el, q, ar, npi = view_atoms[k]
                index[k] = self._add_atom(_PAtom(el, q, ar, npi))
        for p, attrs in plan.merged_attrs.items():
            self.atoms[p] = attrs
        for (a, b), c in view_bonds.items():
            pa, pb = index[a], index[b]
            if a in plan.merge and b in plan.merge:
                self._add_bond(pa, pb, plan.shared_code)
            else:
                self._add_bond(pa, pb, c)
        self.placements.append(Placement(cf, tuple(index[k] for k in range(cf.size))))
        inst = len(self.placements) - 1
        self.queue.remove(focal)
        self._enqueue(inst)
        self._prune()
        return inst

    def cauterize(self, focal):
        if focal not in self.queue:
            raise StoryError(f"focal {focal} is not in the queue")
        self.queue.remove(focal)
        self.cauterized.add(focal)

    def finalize(self):
        """Kekulize and fill open valences with hydrogens."""
        n = len(self.atoms)
        needs = {i for i, a in enumerate(self.atoms) if a.needs_pi}
        arom = [key for key, c in self.bonds.items() if c == AROMATIC]
        doubles = kekulize(n, arom, needs)
        bonds = []
        used = [0] * n
        for (a, b), c in self.bonds.items():
            order = (DOUBLE if (a, b) in doubles else SINGLE) if c == AROMATIC else c
            bonds.append(Bond(a, b, order))
            used[a] += order
            used[b] += order
        atoms = []
        for i, a in enumerate(self.atoms):
            v = fill_valence(a.element, a.charge, used[i])
            if v is None:
                raise DockError(f"atom {i} exceeds valence")
            atoms.append(Atom(a.element, a.charge, False, v - used[i]))
        return MolGraph(atoms, bonds)


def dock(pm, focal, nxt):
    """Functional dock: returns a new PartialMolecule."""
    cf, att = nxt
    out = pm.copy()
    out.dock(focal, cf, tuple(getattr(att, "atoms", att)))
    return out


def cauterize(pm, focal):
    out = pm.copy()
    out.cauterize(focal)
    return out


def enumerate_attachment_points(cf, registry):
    """Registered standard attachments of ``cf`` whose atoms can still bond."""
    from .canon import StandardAttachment

    out = set()
    for (smiles, key), rep in registry.items():
        if smiles != cf.smiles:
            continue
        if all(free_valence(cf.graph, a) >= 1 for a in rep):
            out.add(StandardAttachment(rep))
    return out


def valid_actions(pm, focal, actions):
    """Indices of ``actions`` (``(cf, attachment)`` pairs) dockable at ``focal``.

    The cauterize index ``len(actions)`` is always included.
    """
    out = []
    arity = len(focal[1])
    fp = pm.tuple_atoms(*focal)
    elements = [pm.atoms[a].element for a in fp]
    for idx, (cf, att) in enumerate(actions):
        tup = tuple(getattr(att, "atoms", att))
        if len(tup) != arity:
            continue
        view_atoms = _fragment_view(cf.smiles)[0]
        if sorted(view_atoms[k][0] for k in tup) != sorted(elements):
            continue
        try:
            pm.plan_dock(focal, cf, tup)
        except DockError:
            continue
        out.append(idx)
    out.append(len(actions))
    return out


# -- stories -------------------------------------------------------------------

@dataclass(frozen=True)
class StoryStep:
    action: str  # "start" | "dock" | "cauterize"
    focal: tuple = None  # (instance index, canonical tuple)
    fragment: str = None  # canonical SMILES of the added fragment
    attachment: tuple = None  # incoming canonical tuple, aligned with the focal tuple


@dataclass
class Story:
    steps: list
    final_smiles: str = ""

    def __len__(self):
        return len(self.steps)

    @property
    def n_fragments(self):
        return sum(s.action in ("start", "dock") for s in self.steps)


@dataclass
class Decomposition:
    mol: MolGraph
    fragments: list
    attachments: list
    placements: list  # (CanonicalFragment, local->canonical map) per fragment
    shared: dict = field(default_factory=dict)


def decompose(m):
    frags = generate_fragments(m)
    atts = derive_attachments(m, frags)
    placements = [canonicalize_fragment(fi, m, return_map=True) for fi in frags]
    shared = {}
    for att in atts:
        i, j = att.fragment_pair
        shared.setdefault(i, []).append((j, frozenset(att.shared_atoms)))
        shared.setdefault(j, []).append((i, frozenset(att.shared_atoms)))
    return Decomposition(m, frags, atts, placements, shared)


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def unroll_story(m, seed=None, decomposition=None):
    """Sample a random story that rebuilds ``m``."""
    rng = _as_rng(seed)
    dec = decomposition or decompose(m)
    frags = dec.fragments

    def canon_to_global(j):
        fi = frags[j]
        _, fmap = dec.placements[j]
        out = [0] * fi.size
        for local, canon in enumerate(fmap):
            out[canon] = fi.global_atoms[local]
        return out

    start = int(rng.integers(len(frags)))
    cf0 = dec.placements[start][0]
    pm = PartialMolecule.start(cf0)
    inst_source = [start]
    inst_globals = [canon_to_global(start)]
    placed_atoms = set(frags[start].global_atoms)
    added = {start}
    steps = [StoryStep("start", fragment=cf0.smiles)]
    # every instance enqueues at most one tuple per atom and per ring bond, each consumed once
    limit = 1 + sum(2 * len(f.global_atoms) for f in frags)
    while pm.queue:
        if len(steps) > limit:
            raise StoryError("story did not terminate")
        focal = pm.queue[int(rng.integers(len(pm.queue)))]
        inst, tup = focal
        where = [inst_globals[inst][t] for t in tup]
        target = frozenset(where)
        nxt = None
        for j, shared in sorted(dec.shared.get(inst_source[inst], [])):
            if shared == target and j not in added:
                nxt = j
                break
        if nxt is None:
            pm.cauterize(focal)
            steps.append(StoryStep("cauterize", focal=focal))
            continue
        fi = frags[nxt]
        overlap = placed_atoms.intersection(fi.global_atoms)
        if overlap != target:
            raise DecompositionError("fragment closes a ring of fragments; not representable")
        cf, fmap = dec.placements[nxt]
        in_tuple = tuple(fmap[fi.global_to_local[g]] for g in where)
        try:
            new_inst = pm.dock(focal, cf, in_tuple)
        except DockError as exc:
            raise DecompositionError(f"source dock rejected: {exc}") from exc
        if pm.placements[new_inst].atoms[in_tuple[0]] != pm.tuple_atoms(*focal)[0]:
            # the preserving orientation was rejected; the story would not replay faithfully
            raise DecompositionError("dock orientation ambiguity")
        inst_source.append(nxt)
        inst_globals.append(canon_to_global(nxt))
        placed_atoms.update(fi.global_atoms)
        added.add(nxt)
        steps.append(StoryStep("dock", focal=focal, fragment=cf.smiles, attachment=in_tuple))
    if len(added) != len(frags):
        raise DecompositionError("story did not reach every fragment")
    final = write_canonical_smiles(pm.finalize())
    return Story(steps, final)


def iter_story_states(story):
    """Yield ``(pm, step)`` before each non-start step; ``pm`` is live and mutated afterwards."""
    first = story.steps[0]
    if first.action != "start":
        raise StoryError("story must begin with a start step")
    pm = PartialMolecule.start(fragment_from_smiles(first.fragment))
    yield pm, first
    for step in story.steps[1:]:
        yield pm, step
        if step.action == "dock":
            pm.dock(step.focal, fragment_from_smiles(step.fragment), step.attachment)
        elif step.action == "cauterize":
            pm.cauterize(step.focal)
        else:
            raise StoryError(f"unexpected step {step.action!r}")
    if pm.queue:
        raise StoryError("queue not empty at the end of the story")


def replay_partial(story):
    pm = None
    for pm, _ in iter_story_states(story):
        pass
    return pm


def replay_story(story):
    pm = replay_partial(story)
    mol = pm.finalize()
    if story.final_smiles and write_canonical_smiles(mol) != story.final_smiles:
        raise StoryError("replayed molecule differs from the recorded final SMILES")
    return mol


def _fmt_tuple(t):
    return ",".join(str(x) for x in t)


def _parse_tuple(s):
    return tuple(int(x) for x in s.split(","))


def format_story(story):
    lines = []
    for s in story.steps:
        if s.action == "start":
            lines.append(f"START {s.fragment}")
        elif s.action == "dock":
            lines.append(f"DOCK {s.focal[0]} {_fmt_tuple(s.focal[1])} {s.fragment} {_fmt_tuple(s.attachment)}")
        else:
            lines.append(f"CAUT {s.focal[0]} {_fmt_tuple(s.focal[1])}")
    lines.append(f"END {story.final_smiles}")
    return "\n".join(lines) + "\n"


def parse_story(text):
    steps = []
    final = ""
    for n, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        try:
            if tag == "START" and len(parts) == 2:
                steps.append(StoryStep("start", fragment=parts[1]))
            elif tag == "DOCK" and len(parts) == 5:
                steps.append(StoryStep("dock", focal=(int(parts[1]), _parse_tuple(parts[2])),
                                       fragment=parts[3], attachment=_parse_tuple(parts[4])))
            elif tag == "CAUT" and len(parts) == 3:
                steps.append(StoryStep("cauterize", focal=(int(parts[1]), _parse_tuple(parts[2]))))
            elif tag == "END" and len(parts) == 2:
                final = parts[1]
            else:
                raise ValueError
        except ValueError:
            raise StoryError(f"malformed story line {n}: {line!r}") from None
    return Story(steps, final)
