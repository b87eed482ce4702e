"""Canonical atom ranking and canonical SMILES."""
from .graph import ATOMIC_NUMBER, MoleculeError
from .smiles import write_smiles

# Upper bound on tie-break leaves explored; only reached by highly
# symmetric graphs far larger than the fragment corpus.
MAX_LEAVES = 20000


def atom_invariant(m, i):
    a = m.atoms[i]
    return (
        ATOMIC_NUMBER[a.element],
        a.formal_charge,
        int(a.is_aromatic),
        m.degree(i),
        a.implicit_h,
        m.ring_membership[i],
    )


def _dense(keys):
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def refine(m, classes):
    """Iterate neighbourhood refinement until the partition is stable."""
    classes = list(classes)
    n_classes = len(set(classes))
    while True:
        keys = [
            (classes[i], tuple(sorted((m.bond_code(k), classes[j]) for j, k in m.neighbors(i))))
            for i in range(m.n_atoms)
        ]
        new = _dense(keys)
        n_new = len(set(new))
        if n_new == n_classes:
            return new
        classes, n_classes = new, n_new


def _search(m):
    n = m.n_atoms
    best = [None, None]
    leaves = [0]

    def visit(classes):
        if leaves[0] >= MAX_LEAVES:
            return
        classes = refine(m, classes)
        if len(set(classes)) == n:
            leaves[0] += 1
            smi, _ = write_smiles(m, classes)
            if best[0] is None or smi < best[0]:
                best[0], best[1] = smi, classes
            return
        counts = {}
        for c in classes:
            counts[c] = counts.get(c, 0) + 1
        target = min(c for c, k in counts.items() if k > 1)
        for atom in [i for i in range(n) if classes[i] == target]:
            keys = [(c, 0 if (i == atom or c != target) else 1) for i, c in enumerate(classes)]
            visit(_dense(keys))

    visit(_dense([atom_invariant(m, i) for i in range(n)]))
    return best[0], best[1]


def canonical_ranks(m):
    """Total order of atoms that depends only on the isomorphism class of ``m``.

    Symmetric ties left after refinement are broken by trying each tied atom
    and keeping the ordering whose SMILES is lexicographically smallest.
    """
    if m.n_atoms == 0:
        return []
    if m.n_components() != 1:
        classes = refine(m, _dense([atom_invariant(m, i) for i in range(m.n_atoms)]))
        return _dense([(c, i) for i, c in enumerate(classes)])
    return _search(m)[1]


def write_canonical_smiles(m, return_order=False):
    if m.n_atoms == 0:
        raise MoleculeError("empty molecule")
    if m.n_components() != 1:
        raise MoleculeError("molecule is disconnected")
    smi, ranks = _search(m)
    if return_order:
        return smi, write_smiles(m, ranks)[1]
    return smi
