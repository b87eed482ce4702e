import pytest

from molstory.canon import (
    AttachmentRegistry, build_standardization_map, canonicalize_fragment, fragment_from_smiles,
    recover_cyclic_maps, standardize_attachment,
)
from molstory.fragmenter import generate_fragments
from molstory.io import build_vocabulary
from molstory.molgraph import parse_smiles
from conftest import automorphism_orbits


def test_pyrazine_maps_and_std_map():
    cf = fragment_from_smiles("c1cnccn1")
    assert len(cf.possible_maps) == 4
    assert [f[0] for f in cf.possible_maps] == [0, 3, 4, 1]
    assert [f[2] for f in cf.possible_maps] == [2, 5, 2, 5]
    assert cf.std_map[0] == 0 and cf.std_map[2] == 2


def test_pyrazine_bond_attachments_collapse():
    cf = fragment_from_smiles("c1cnccn1")
    reg = AttachmentRegistry()
    first = standardize_attachment((0, 1), cf, reg)
    for tup in [(3, 4), (4, 3), (1, 0), (0, 1)]:
        assert cf.orbit_key(tup) == (0, 0)
        assert standardize_attachment(tup, cf, reg) == first
    assert first.atoms == (0, 1)


def test_map_counts():
    assert len(fragment_from_smiles("c1ccccc1").possible_maps) == 12
    assert len(fragment_from_smiles("CC").possible_maps) == 2
    assert fragment_from_smiles("c1ccccc1").std_map == (0,) * 6


def test_asymmetric_fragment_identity_map():
    cf = fragment_from_smiles("C1=CN=CC1")
    assert len(cf.possible_maps) == 1
    assert cf.std_map == tuple(range(5))


def test_pyridine_orbits():
    cf = fragment_from_smiles("c1ccncc1")
    n = [i for i, a in enumerate(cf.graph.atoms) if a.element == "N"][0]
    nb = [j for j, _ in cf.graph.neighbors(n)]
    para = (n + 3) % 6
    assert cf.orbit_key((nb[0],)) == cf.orbit_key((nb[1],))
    assert cf.orbit_key((para,)) != cf.orbit_key((nb[0],))


def test_indane_benzene_canonical_local():
    m = parse_smiles("CC1Cc2ccccc2C1")
    fi = generate_fragments(m)[1]
    cf, fmap = canonicalize_fragment(fi, m, return_map=True)
    assert cf.smiles == "c1ccccc1" and sorted(fmap) == list(range(6))


def test_bond_fragment_identity():
    m = parse_smiles("CCC1CCCC1")
    bonds = [f for f in generate_fragments(m) if f.kind == "bond"]
    assert {canonicalize_fragment(f, m).smiles for f in bonds} == {"CC"}


def test_std_map_idempotent_and_from_maps():
    for s in ("c1cnccn1", "c1ccncc1", "C1CC1", "C1=CCC=CC1", "c1ccoc1"):
        cf = fragment_from_smiles(s)
        std = cf.std_map
        assert all(std[std[i]] == std[i] for i in range(cf.size))
        assert build_standardization_map(list(cf.possible_maps)) == std


def test_maps_preserve_labels_and_adjacency():
    for s in ("c1cnccn1", "c1ccncc1", "C1=CN=CC1", "CC", "c1cc[nH]c1"):
        g = fragment_from_smiles(s).graph
        codes = {b.key: g.bond_code(k) for k, b in enumerate(g.bonds)}
        for f in recover_cyclic_maps(g, g):
            for i in range(g.n_atoms):
                assert g.atoms[i].element == g.atoms[f[i]].element
            for (a, b), c in codes.items():
                assert codes[(min(f[a], f[b]), max(f[a], f[b]))] == c


def _std_classes(cf):
    groups = {}
    for i, v in enumerate(cf.std_map):
        groups.setdefault(v, set()).add(i)
    return {frozenset(s) for s in groups.values()}


@pytest.mark.parametrize("smiles", ["c1ccccc1", "c1cnccn1", "c1ccncc1", "C1CCOC1", "C1CC1", "CC",
                                    "C=O", "c1ccsc1", "C1=CCC=C1", "C1=CCCC1", "c1cnc[nH]1", "C1CCCCCCC1"])
def test_std_map_equals_brute_force_orbits(smiles):
    cf = fragment_from_smiles(smiles)
    assert _std_classes(cf) == automorphism_orbits(cf.graph)


def test_non_fragment_rejected():
    for s in ("O=C1CCCC1", "CCC", "c1ccc2ccccc2c1"):
        with pytest.raises(ValueError):
            fragment_from_smiles(s)


def test_registry_first_seen_and_default():
    cf = fragment_from_smiles("c1ccccc1")
    reg = AttachmentRegistry()
    assert reg.lookup(cf, (3,)).atoms == (0,)
    reg.register(cf, (4,))
    assert reg.lookup(cf, (2,)).atoms == (4,)
    assert reg.counts[("c1ccccc1", (0,))] == 1


def test_corpus_vocabulary_orbit_oracle(corpus):
    vocab = build_vocabulary(corpus)
    for s in vocab.fragments:
        cf = fragment_from_smiles(s)
        if cf.size <= 8:
            assert _std_classes(cf) == automorphism_orbits(cf.graph), s
