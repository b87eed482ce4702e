from .canonical import canonical_ranks, write_canonical_smiles
from .fingerprint import AtomFingerprint, atom_fingerprint, atom_fingerprints, tanimoto
from .graph import (
    AROMATIC, DOUBLE, SINGLE, TRIPLE, Atom, Bond, KekulizeError, MoleculeError,
    MolGraph, ValenceError, allowed_valences, fill_valence, kekulize, max_valence,
)
from .smiles import SmilesError, parse_smiles, write_smiles


def free_valence(m, atom_idx):
    """Bonding capacity left on an atom; implicit hydrogens count as free."""
    a = m.atoms[atom_idx]
    return max_valence(a.element, a.formal_charge) - m.bond_order_sum(atom_idx)


def canonical_smiles(text):
    return write_canonical_smiles(parse_smiles(text))


__all__ = [
    "AROMATIC", "DOUBLE", "SINGLE", "TRIPLE", "Atom", "AtomFingerprint", "Bond",
    "KekulizeError", "MoleculeError", "MolGraph", "SmilesError", "ValenceError",
    "allowed_valences", "atom_fingerprint", "atom_fingerprints", "canonical_ranks",
    "canonical_smiles", "fill_valence", "free_valence", "kekulize", "max_valence",
    "parse_smiles", "tanimoto", "write_canonical_smiles", "write_smiles",
]
