"""Per-atom circular fingerprints and Tanimoto similarity."""
import hashlib
from dataclasses import dataclass

DEFAULT_WIDTH = 2048


def stable_hash(obj):
    """64-bit hash of ``repr(obj)``; identical across runs and platforms."""
    digest = hashlib.blake2b(repr(obj).encode("ascii"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class AtomFingerprint:
    bits: frozenset
    radius: int = 0
    width: int = DEFAULT_WIDTH

    def __post_init__(self):
        object.__setattr__(self, "bits", frozenset(self.bits))
        if any(not 0 <= b < self.width for b in self.bits):
            raise ValueError("bit outside fingerprint width")


def _initial_identifier(m, i):
    a = m.atoms[i]
    return stable_hash((
        "atom", a.element, a.formal_charge, a.implicit_h, m.degree(i),
        a.is_aromatic, m.ring_membership[i] > 0,
    ))


def environment_identifiers(m, radius):
    """``ids[r][i]``: identifier of the radius-``r`` environment around atom ``i``."""
    ids = [[_initial_identifier(m, i) for i in range(m.n_atoms)]]
    for r in range(1, radius + 1):
        prev = ids[-1]
        ids.append([
            stable_hash((r, prev[i], tuple(sorted((m.bond_code(k), prev[j]) for j, k in m.neighbors(i)))))
            for i in range(m.n_atoms)
        ])
    return ids


def atom_fingerprints(m, radius, width=DEFAULT_WIDTH):
    if radius < 0:
        raise ValueError("radius must be non-negative")
    ids = environment_identifiers(m, radius)
    return [
        AtomFingerprint(frozenset(level[i] % width for level in ids), radius, width)
        for i in range(m.n_atoms)
    ]


def atom_fingerprint(m, atom_idx, radius, width=DEFAULT_WIDTH):
    return atom_fingerprints(m, radius, width)[atom_idx]


def tanimoto(f1, f2):
    if f1.width != f2.width:
        raise ValueError(f"fingerprint widths differ: {f1.width} vs {f2.width}")
    union = len(f1.bits | f2.bits)
    if union == 0:
        return 1.0
    return len(f1.bits & f2.bits) / union
