"""Attributed molecular graph with valence bookkeeping and aromaticity."""
from dataclasses import dataclass, replace
from functools import cached_property

from .rings import count_components, find_sssr

SINGLE, DOUBLE, TRIPLE, AROMATIC = 1, 2, 3, 4

ATOMIC_NUMBER = {
    "H": 1, "B": 5, "C": 6, "N": 7, "O": 8, "F": 9,
    "P": 15, "S": 16, "Cl": 17, "Br": 35, "I": 53,
}

VALENCES = {
    "H": (1,), "B": (3,), "C": (4,), "N": (3,), "O": (2,), "F": (1,),
    "P": (3, 5), "S": (2, 4, 6), "Cl": (1,), "Br": (1,), "I": (1,),
}

# elements to the right of carbon gain a bond per positive charge
_ELECTRON_RICH = {"N", "O", "F", "P", "S", "Cl", "Br", "I"}


class MoleculeError(ValueError):
    """Base class for chemistry failures."""


class ValenceError(MoleculeError):
    pass


class KekulizeError(MoleculeError):
    pass


def allowed_valences(element, charge=0):
    if element not in VALENCES:
        raise MoleculeError(f"unsupported element {element!r}")
    base = VALENCES[element]
    if charge == 0:
        return base
    if element in _ELECTRON_RICH:
        vals = [v + charge for v in base]
    elif element == "B":
        vals = [v - charge for v in base]
    else:
        vals = [v - abs(charge) for v in base]
    return tuple(v for v in vals if v >= 0)


def max_valence(element, charge=0):
    vals = allowed_valences(element, charge)
    return max(vals) if vals else 0


def fill_valence(element, charge, used):
    """Smallest allowed valence that accommodates ``used``, or None."""
    for v in allowed_valences(element, charge):
        if v >= used:
            return v
    return None


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    is_aromatic: bool = False
    implicit_h: int = 0

    def __post_init__(self):
        if self.element not in VALENCES:
            raise MoleculeError(f"unsupported element {self.element!r}")
        if self.implicit_h < 0:
            raise MoleculeError("negative hydrogen count")


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: int = SINGLE

    @property
    def key(self):
        return (min(self.begin, self.end), max(self.begin, self.end))


class MolGraph:
    """Kekulé molecular graph.

    Bond orders are stored as 1/2/3; aromaticity is perceived on
    construction and exposed through ``Atom.is_aromatic`` and
    :attr:`aromatic_bonds`, so two Kekulé forms of the same molecule agree
    on every aromatic flag.
    """

    def __init__(self, atoms, bonds, coords=None):
        atoms = list(atoms)
        bonds = list(bonds)
        n = len(atoms)
        seen = set()
        for b in bonds:
            if b.begin == b.end or not (0 <= b.begin < n and 0 <= b.end < n):
                raise MoleculeError(f"invalid bond endpoints {b.begin}-{b.end}")
            if b.order not in (SINGLE, DOUBLE, TRIPLE):
                raise MoleculeError("MolGraph bonds must be kekulized")
            if b.key in seen:
                raise MoleculeError(f"duplicate bond {b.key}")
            seen.add(b.key)
        self.bonds = tuple(bonds)
        self._atoms_raw = tuple(atoms)
        self._bond_index = {b.key: k for k, b in enumerate(self.bonds)}
        adj = [[] for _ in range(n)]
        for k, b in enumerate(self.bonds):
            adj[b.begin].append((b.end, k))
            adj[b.end].append((b.begin, k))
        for nb in adj:
            nb.sort()
        self._adj = adj
        for i, a in enumerate(atoms):
            used = self.bond_order_sum(i) + a.implicit_h
            if used > max_valence(a.element, a.formal_charge):
                raise ValenceError(
                    f"atom {i} ({a.element}) has valence {used}, "
                    f"max {max_valence(a.element, a.formal_charge)}"
                )
        if coords is not None:
            coords = tuple(tuple(float(c) for c in xyz) for xyz in coords)
            if len(coords) != n or any(len(xyz) != 3 for xyz in coords):
                raise MoleculeError("coords must hold one 3-vector per atom")
        self.coords = coords
        arom_atoms, arom_bonds = _perceive_aromaticity(self)
        self.atoms = tuple(
            replace(a, is_aromatic=(i in arom_atoms)) for i, a in enumerate(atoms)
        )
        self.aromatic_bonds = frozenset(arom_bonds)

    def __len__(self):
        return len(self.atoms)

    def __repr__(self):
        return f"MolGraph(n_atoms={len(self.atoms)}, n_bonds={len(self.bonds)})"

    @property
    def n_atoms(self):
        return len(self.atoms)

    def neighbors(self, i):
        """List of ``(neighbor, bond_index)`` sorted by neighbor."""
        return self._adj[i]

    def degree(self, i):
        return len(self._adj[i])

    def bond_between(self, i, j):
        k = self._bond_index.get((min(i, j), max(i, j)))
        return None if k is None else self.bonds[k]

    def bond_index(self, i, j):
        return self._bond_index.get((min(i, j), max(i, j)))

    def bond_order_sum(self, i):
        return sum(self.bonds[k].order for _, k in self._adj[i])

    def bond_code(self, k):
        """Kekulé-independent bond label (AROMATIC for perceived aromatic bonds)."""
        return AROMATIC if k in self.aromatic_bonds else self.bonds[k].order

    @cached_property
    def rings(self):
        return find_sssr(len(self._atoms_raw), [b.key for b in self.bonds])

    @cached_property
    def ring_bonds(self):
        out = set()
        for ring in self.rings:
            for k in range(len(ring)):
                out.add(self.bond_index(ring[k], ring[(k + 1) % len(ring)]))
        return frozenset(out)

    @cached_property
    def ring_membership(self):
        counts = [0] * len(self._atoms_raw)
        for ring in self.rings:
            for a in ring:
                counts[a] += 1
        return tuple(counts)

    def n_components(self):
        return count_components(len(self.atoms), [b.key for b in self.bonds])

    def permute(self, perm):
        """Relabel atoms: old index ``i`` becomes ``perm[i]``."""
        inv = [0] * len(perm)
        for old, new in enumerate(perm):
            inv[new] = old
        atoms = [self._atoms_raw[inv[k]] for k in range(len(perm))]
        bonds = [Bond(perm[b.begin], perm[b.end], b.order) for b in self.bonds]
        coords = None if self.coords is None else [self.coords[inv[k]] for k in range(len(perm))]
        return MolGraph(atoms, bonds, coords)


def _pi_electrons(m, i):
    """Electrons atom ``i`` donates to a ring, or None if it cannot be aromatic."""
    a = m._atoms_raw[i]
    ring_double = False
    exo_double = False
    for j, k in m.neighbors(i):
        order = m.bonds[k].order
        if order == TRIPLE:
            return None
        if order == DOUBLE:
            if k in m.ring_bonds:
                ring_double = True
            else:
                exo_double = True
    if ring_double:
        return 1
    if exo_double:
        return 0 if a.element == "C" else None
    q = a.formal_charge
    conn = m.degree(i) + a.implicit_h
    if a.element in ("N", "P") and q == 0 and conn == 3:
        return 2
    if a.element in ("O", "S") and q == 0 and conn == 2:
        return 2
    if a.element == "C" and q == -1 and conn == 3:
        return 2
    if a.element == "B" and q == 0 and conn == 3:
        return 0
    if a.element == "C" and q == 1 and conn == 3:
        return 0
    return None


def _perceive_aromaticity(m):
    atoms, bonds = set(), set()
    for ring in m.rings:
        electrons = [_pi_electrons(m, i) for i in ring]
        if any(e is None for e in electrons):
            continue
        total = sum(electrons)
        if total >= 2 and (total - 2) % 4 == 0:
            atoms.update(ring)
            for k in range(len(ring)):
                bonds.add(m.bond_index(ring[k], ring[(k + 1) % len(ring)]))
    return atoms, bonds


def kekulize(n_atoms, aromatic_edges, needs_pi):
    """Choose double bonds so every atom in ``needs_pi`` gets exactly one.

    ``aromatic_edges`` is a list of ``(u, v)`` pairs; returns the set of
    edges (as sorted pairs) that become double. Raises KekulizeError when no
    perfect matching exists.
    """
    adj = {i: [] for i in needs_pi}
    for u, v in aromatic_edges:
        if u in adj and v in adj:
            adj[u].append(v)
            adj[v].append(u)
    for nb in adj.values():
        nb.sort()
    match = {}

    def solve():
        free = [i for i in adj if i not in match]
        if not free:
            return True
        # most constrained atom first keeps backtracking shallow
        best, options = None, None
        for i in sorted(free):
            opts = [j for j in adj[i] if j not in match]
            if options is None or len(opts) < len(options):
                best, options = i, opts
                if len(opts) <= 1:
                    break
        for j in options:
            match[best] = j
            match[j] = best
            if solve():
                return True
            del match[best]
            del match[j]
        return False

    if not solve():
        raise KekulizeError("cannot assign alternating double bonds")
    return {(min(u, v), max(u, v)) for u, v in match.items()}
