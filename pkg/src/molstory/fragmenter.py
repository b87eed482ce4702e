"""Decomposition of a molecule into ring and bond fragments."""
from dataclasses import dataclass
from functools import cached_property

from .molgraph import MoleculeError


class DecompositionError(MoleculeError):
    pass


@dataclass(frozen=True)
class FragmentInstance:
    """A fragment placed in a parent molecule.

    ``global_atoms`` lists parent atom indices in local (extraction) order;
    for rings that is the cycle traversal order. ``bonds`` holds the parent
    bond indices this fragment owns; a bond fused between two rings is owned
    by the ring extracted first.
    """

    global_atoms: tuple
    kind: str
    bonds: tuple = ()

    @property
    def size(self):
        return len(self.global_atoms)

    @cached_property
    def local_to_global(self):
        return dict(enumerate(self.global_atoms))

    @cached_property
    def global_to_local(self):
        return {g: k for k, g in enumerate(self.global_atoms)}

    def cycle_bond_keys(self):
        n = len(self.global_atoms)
        if self.kind == "bond":
            a, b = self.global_atoms
            return [(min(a, b), max(a, b))]
        out = []
        for k in range(n):
            a, b = self.global_atoms[k], self.global_atoms[(k + 1) % n]
            out.append((min(a, b), max(a, b)))
        return out


@dataclass(frozen=True)
class GlobalAttachment:
    fragment_pair: tuple
    shared_atoms: tuple


def get_sssr(m):
    return list(m.rings)


def generate_fragments(m):
    """All SSSR rings, then every bond not inside an already collected fragment."""
    if m.n_components() != 1:
        raise DecompositionError("fragment extraction needs a single connected molecule")
    collected = [tuple(r) for r in get_sssr(m)]
    atom_sets = [set(r) for r in collected]
    for b in m.bonds:
        a1, a2 = b.begin, b.end
        if any(a1 in s and a2 in s for s in atom_sets):
            continue
        collected.append((a1, a2))
        atom_sets.append({a1, a2})

    owned = set()
    fragments = []
    for atoms in collected:
        kind = "ring" if len(atoms) >= 3 else "bond"
        inst = FragmentInstance(atoms, kind)
        mine = []
        for key in inst.cycle_bond_keys():
            k = m.bond_index(*key)
            if k not in owned:
                owned.add(k)
                mine.append(k)
        fragments.append(FragmentInstance(atoms, kind, tuple(sorted(mine))))
    if len(owned) != len(m.bonds):
        raise DecompositionError("some bonds are not covered by any fragment")
    return fragments


def derive_attachments(m, frags):
    """One attachment per fragment pair sharing atoms.

    Shared atoms are listed in the first fragment's traversal order. Pairs
    sharing more than two atoms (bridged systems) or two unbonded atoms are
    rejected.
    """
    out = []
    for i in range(len(frags)):
        si = set(frags[i].global_atoms)
        for j in range(i + 1, len(frags)):
            shared = si.intersection(frags[j].global_atoms)
            if not shared:
                continue
            if len(shared) > 2:
                raise DecompositionError("bridged ring systems are not supported")
            ordered = tuple(a for a in frags[i].global_atoms if a in shared)
            if len(ordered) == 2 and m.bond_between(*ordered) is None:
                raise DecompositionError("fragments share two unbonded atoms")
            out.append(GlobalAttachment((i, j), ordered))
    return out
