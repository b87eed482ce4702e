import networkx as nx
import pytest
from hypothesis import given, strategies as st

from molstory.molgraph import (
    AtomFingerprint, MoleculeError, SmilesError, atom_fingerprint, atom_fingerprints,
    canonical_ranks, canonical_smiles, free_valence, parse_smiles, tanimoto,
    write_canonical_smiles,
)
from conftest import automorphism_orbits

SAMPLES = ["c1ccccc1", "c1ccncc1", "CC1Cc2ccccc2C1", "O=C1CC(=O)C=C1C(=O)O", "c1ccc2ccccc2c1",
           "O=c1cc[nH]cc1", "CC(C)(C)c1ccc(O)cc1", "C1CC1C#N", "c1ccc2[nH]ccc2c1", "CS(=O)(=O)N"]


def test_parse_counts_atoms_bonds_and_ring():
    m = parse_smiles("O=C1CC(=O)C=C1C(=O)O")
    assert (m.n_atoms, len(m.bonds)) == (10, 10)
    assert [len(r) for r in m.rings] == [5]


def test_methane_hydrogens():
    assert parse_smiles("C").atoms[0].implicit_h == 4


def test_unsupported_element_position():
    with pytest.raises(SmilesError, match="unsupported element at position 6") as err:
        parse_smiles("C1CC1X")
    assert err.value.position == 6


@pytest.mark.parametrize("bad", ["C1CC", "C(C", "CC)", "C=", "c1cccc1", "C(C)(C)(C)(C)C", ""])
def test_malformed_smiles_rejected(bad):
    with pytest.raises(MoleculeError):
        parse_smiles(bad)


@pytest.mark.parametrize("smiles", SAMPLES)
def test_canonical_is_idempotent(smiles):
    once = canonical_smiles(smiles)
    assert canonical_smiles(once) == once


def test_kekule_forms_share_canonical_string():
    assert canonical_smiles("C1=CC=CC=C1") == canonical_smiles("c1ccccc1") == canonical_smiles("C=1C=CC=CC=1")
    assert canonical_smiles("Cc1ccccc1") == canonical_smiles("CC1=CC=CC=C1")


@given(st.sampled_from(SAMPLES), st.randoms(use_true_random=False))
def test_canonical_permutation_invariance(smiles, rnd):
    m = parse_smiles(smiles)
    perm = list(range(m.n_atoms))
    rnd.shuffle(perm)
    assert write_canonical_smiles(m.permute(perm)) == write_canonical_smiles(m)


def test_canonical_ranks_total_order():
    for s in ("c1ccccc1", "c1ccncc1"):
        ranks = canonical_ranks(parse_smiles(s))
        assert sorted(ranks) == list(range(6))


def test_pyridine_nitrogen_rank_unique():
    m = parse_smiles("c1ccncc1")
    ranks = canonical_ranks(m)
    n = [i for i, a in enumerate(m.atoms) if a.element == "N"][0]
    assert all(ranks[n] != ranks[i] for i in range(6) if i != n)


def test_disconnected_rejected_by_writer():
    with pytest.raises(MoleculeError):
        write_canonical_smiles(parse_smiles("C.C"))


@pytest.mark.parametrize("smiles,idx,free", [("C", 0, 4), ("c1ccccc1", 0, 1), ("C(=O)O", 0, 1)])
def test_free_valence(smiles, idx, free):
    assert free_valence(parse_smiles(smiles), idx) == free


def test_valence_violation():
    with pytest.raises(MoleculeError):
        parse_smiles("C(C)(C)(C)(C)C")


def _nx(m):
    g = nx.Graph()
    g.add_nodes_from(range(m.n_atoms))
    g.add_edges_from((b.begin, b.end) for b in m.bonds)
    return g


@pytest.mark.parametrize("smiles", SAMPLES + ["C1CC2CCC1C2", "C1CC2(C1)CC2", "c1ccc2c(c1)ccc1ccccc12"])
def test_sssr_matches_minimum_cycle_basis(smiles):
    m = parse_smiles(smiles)
    ours = sorted(len(r) for r in m.rings)
    oracle = sorted(len(c) for c in nx.minimum_cycle_basis(_nx(m)))
    assert ours == oracle


def test_sssr_rings_are_cycles_in_traversal_order():
    m = parse_smiles("c1ccc2ccccc2c1")
    assert sorted(len(r) for r in m.rings) == [6, 6]
    for r in m.rings:
        assert r[0] == min(r) and r[1] < r[-1]
        assert all(m.bond_between(r[k], r[(k + 1) % len(r)]) is not None for k in range(len(r)))


def test_acyclic_has_no_rings():
    assert parse_smiles("CCCCO").rings == []


@pytest.mark.parametrize("smiles", ["c1ccccc1", "c1ccncc1", "c1cnccn1", "C1CC1C", "CC(C)O", "C1CCOC1"])
@pytest.mark.parametrize("radius", [0, 1, 2])
def test_fingerprints_constant_on_automorphism_orbits(smiles, radius):
    m = parse_smiles(smiles)
    fps = atom_fingerprints(m, radius)
    for orbit in automorphism_orbits(m):
        assert len({fps[i] for i in orbit}) == 1


def test_fingerprint_distinguishes_nitrogen():
    m = parse_smiles("c1ccncc1")
    n = [i for i, a in enumerate(m.atoms) if a.element == "N"][0]
    c = (n + 1) % 6
    assert atom_fingerprint(m, n, 0) != atom_fingerprint(m, c, 0)


def test_tanimoto_examples():
    f = AtomFingerprint({1, 2, 3})
    assert tanimoto(f, f) == 1.0
    assert tanimoto(f, AtomFingerprint({4, 5})) == 0.0
    assert tanimoto(f, AtomFingerprint({2, 3, 4})) == 0.5
    with pytest.raises(ValueError):
        tanimoto(f, AtomFingerprint({1}, width=64))


@given(st.sets(st.integers(0, 63)), st.sets(st.integers(0, 63)))
def test_tanimoto_bounds_and_symmetry(a, b):
    fa, fb = AtomFingerprint(a, width=64), AtomFingerprint(b, width=64)
    t = tanimoto(fa, fb)
    assert 0.0 <= t <= 1.0 and t == tanimoto(fb, fa)


def test_corpus_round_trip(corpus):
    for r in corpus:
        s = canonical_smiles(r.smiles)
        assert canonical_smiles(s) == s
        m = parse_smiles(r.smiles)
        assert all(free_valence(m, i) >= 0 for i in range(m.n_atoms))
