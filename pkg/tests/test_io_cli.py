import numpy as np
import pytest

from molstory.cli import main
from molstory.corpus import corpus_path
from molstory.engine import StoryGenerator, save_model
from molstory.io import Vocabulary, build_vocabulary, ingest_csv
from molstory.molgraph import canonical_smiles


def test_ingest_skips_bad_rows(tmp_path, caplog):
    p = tmp_path / "d.csv"
    p.write_text("smiles,logS,redox,sascore\nCCO,1,0.5,2\nC1CC,1,2,3\nc1ccccc1,x,0,1\nCC(=O)O,-1,0,1.5\n")
    recs = ingest_csv(str(p))
    assert [r.smiles for r in recs] == ["CCO", "CC(=O)O"]
    assert recs[0].conditions == (1.0, 0.5, 2.0)
    assert "skipped" in caplog.text


@pytest.mark.parametrize("text", ["", "smiles,logS\nCC,1\n"])
def test_ingest_rejects_unusable_files(tmp_path, text):
    p = tmp_path / "d.csv"
    p.write_text(text)
    with pytest.raises(ValueError):
        ingest_csv(str(p))


def test_benzene_vocabulary_has_no_attachments():
    v = build_vocabulary(["c1ccccc1"])
    assert v.fragments == ["c1ccccc1"] and v.actions() == []
    assert len(v.action_vocabulary()) == 1


def test_fused_example_vocabulary():
    v = build_vocabulary(["CC1Cc2ccccc2C1"])
    assert sorted(v.fragments) == ["C1=CCCC1", "CC", "c1ccccc1"]
    # two bonds join the three fragments; each joins two registered sides
    assert v.actions() == [("C1=CCCC1", (0, 1)), ("C1=CCCC1", (3,)), ("CC", (1,)), ("c1ccccc1", (0, 5))]


def test_fragment_order_is_frequency_then_smiles(corpus):
    v = build_vocabulary(corpus)
    counts = [v.fragment_counts[s] for s in v.fragments]
    assert counts == sorted(counts, reverse=True)
    for a, b in zip(v.fragments, v.fragments[1:]):
        if v.fragment_counts[a] == v.fragment_counts[b]:
            assert a < b


def test_vocabulary_independent_of_input_order(corpus):
    smiles = [r.smiles for r in corpus]
    shuffled = list(np.random.default_rng(4).permutation(smiles))
    assert build_vocabulary(smiles).dumps() == build_vocabulary(shuffled).dumps()


def test_vocabulary_save_load_is_byte_stable(corpus, tmp_path):
    v = build_vocabulary(corpus)
    v.save(str(tmp_path / "a.vocab"))
    Vocabulary.load(str(tmp_path / "a.vocab")).save(str(tmp_path / "b.vocab"))
    assert (tmp_path / "a.vocab").read_bytes() == (tmp_path / "b.vocab").read_bytes()


def test_vocabulary_rejects_tampering(corpus):
    text = build_vocabulary(corpus).dumps()
    with pytest.raises(ValueError):
        Vocabulary.loads(text.replace("CAUTERIZE", "STOP"))
    with pytest.raises(ValueError):
        Vocabulary.loads("molstory-vocab 9\n")


# -- command line --------------------------------------------------------------------

def test_cli_decompose(capsys):
    assert main(["decompose", "O=C1CC(=O)C=C1C(=O)O"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert sum(line.startswith("fragment") for line in out) == 6


def test_cli_unroll_replay(capsys, tmp_path, monkeypatch):
    assert main(["unroll", "--seed", "2", "CC1Cc2ccccc2C1"]) == 0
    story = tmp_path / "s.txt"
    story.write_text(capsys.readouterr().out)
    assert main(["replay", str(story)]) == 0
    assert capsys.readouterr().out.strip() == canonical_smiles("CC1Cc2ccccc2C1")


def test_cli_exit_codes(capsys):
    assert main(["decompose", "C1CC1X"]) == 1
    assert main(["frobnicate"]) == 2
    assert main(["generate", "--logS", "1"]) == 2
    assert main(["inspect-weights", "/nonexistent/file"]) == 1


def test_cli_build_vocab(tmp_path, capsys):
    out = tmp_path / "v.vocab"
    assert main(["build-vocab", str(corpus_path()), "--vocab", str(out)]) == 0
    assert out.read_text().startswith("molstory-vocab 1\n")


@pytest.fixture(scope="module")
def saved_model(tmp_path_factory, corpus):
    d = tmp_path_factory.mktemp("model")
    recs = corpus[:10]
    m = StoryGenerator(epochs=1, d_f=8, d_a=4, heads=2, layers=1, ff=8, init_hidden=8, init_epochs=3)
    m.fit([r.smiles for r in recs], np.array([r.conditions for r in recs]))
    m.vocabulary_.save(str(d / "v.vocab"))
    save_model(m, str(d / "m.weights"))
    return d


def test_cli_generate_and_inspect(saved_model, capsys):
    args = ["--vocab", str(saved_model / "v.vocab"), "--weights", str(saved_model / "m.weights")]
    assert main(["generate", "--logS", "1", "--redox", "0.2", "--sa", "2", "-n", "2", "--seed", "4", *args]) == 0
    first = capsys.readouterr().out
    assert first.count("END ") == 2
    main(["generate", "--logS", "1", "--redox", "0.2", "--sa", "2", "-n", "2", "--seed", "4", *args])
    assert capsys.readouterr().out == first
    assert main(["inspect-weights", str(saved_model / "m.weights")]) == 0
    assert "tensor head_w" in capsys.readouterr().out


def test_cli_generate_with_bundled_defaults(capsys):
    assert main(["generate", "--logS", "-2.0", "--redox", "0.5", "--sa", "2.5", "--seed", "1"]) == 0
    assert "END " in capsys.readouterr().out


def test_cli_corrupt_weights(saved_model, tmp_path):
    blob = bytearray((saved_model / "m.weights").read_bytes())
    blob[-10] ^= 0xFF
    bad = tmp_path / "bad.weights"
    bad.write_bytes(bytes(blob))
    assert main(["generate", "--logS", "1", "--redox", "0", "--sa", "2", "--vocab", str(saved_model / "v.vocab"),
                 "--weights", str(bad)]) == 1
