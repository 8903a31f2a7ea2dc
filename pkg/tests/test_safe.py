import random

import pytest

from safeflow.molgraph import mol_equal, parse_smiles, write_canonical
from safeflow.safe import (PAD, SafeError, TokenizeError, Vocabulary, build_vocab, decode_safe, detokenize,
                           encode_safe, find_cuts, permute_fragments, split_tokens, tokenize, training_cuts)
from safeflow.toyset import toy_corpus


def _bond(m, a, b):
    return m.bond_index[(min(a, b), max(a, b))]


def test_find_cuts_examples():
    butane = parse_smiles("CCCC")
    assert find_cuts(butane) == [_bond(butane, 1, 2)]
    assert find_cuts(parse_smiles("c1ccccc1")) == []
    eb = parse_smiles("CCc1ccccc1")
    assert find_cuts(eb) == [_bond(eb, 1, 2)]


def test_training_cuts_capped_at_lowest_indices():
    m = parse_smiles("C" * 14)
    cuts = find_cuts(m)
    assert len(cuts) == 11
    assert training_cuts(m) == cuts[:8]


def test_encode_butane_and_ethanol():
    butane = parse_smiles("CCCC")
    text = encode_safe(butane, find_cuts(butane))
    assert text == "CC1.CC1"
    assert mol_equal(decode_safe(text), butane)
    ethanol = parse_smiles("CCO")
    text = encode_safe(ethanol, [_bond(ethanol, 0, 1)])
    assert text.count(".") == 1
    assert mol_equal(decode_safe(text), ethanol)


def test_zero_cuts_is_canonical():
    for smi in toy_corpus(20, seed=2):
        m = parse_smiles(smi)
        assert encode_safe(m, []) == write_canonical(m)


def test_encode_errors():
    m = parse_smiles("CCc1ccccc1")
    with pytest.raises(SafeError):
        encode_safe(m, [99])
    ring_bond = next(k for k, b in enumerate(m.bonds) if b.in_ring)
    with pytest.raises(SafeError):
        encode_safe(m, [ring_bond])
    with pytest.raises(SafeError):
        encode_safe(m, [_bond(m, 1, 2), _bond(m, 1, 2)])


def test_dangling_attachment():
    with pytest.raises(SafeError):
        decode_safe("CC1.CC2")


def test_swapped_fragments_decode_equal():
    assert mol_equal(decode_safe("CC1.CC1"), parse_smiles("CCCC"))
    assert mol_equal(decode_safe("C1.C1O"), decode_safe("C1O.C1"))


def test_permutation_invariance_and_round_trip():
    rng = random.Random(0)
    for smi in toy_corpus(200, seed=4):
        m = parse_smiles(smi)
        text = encode_safe(m, training_cuts(m))
        assert mol_equal(decode_safe(text), m)
        for _ in range(5):
            assert mol_equal(decode_safe(permute_fragments(text, rng)), m)


def test_subset_cuts_round_trip():
    rng = random.Random(1)
    for smi in toy_corpus(60, seed=8):
        m = parse_smiles(smi)
        cuts = find_cuts(m)
        subset = [k for k in cuts if rng.random() < 0.5]
        assert mol_equal(decode_safe(encode_safe(m, subset)), m)


def test_many_cuts_use_percent_numbers():
    m = parse_smiles("C" * 14)
    text = encode_safe(m, find_cuts(m))
    assert "%10" in text and "%11" in text
    assert mol_equal(decode_safe(text), m)


def _vocab(max_len=12):
    return build_vocab(["CC1.CC1", "CCl", "C[N+](=O)[O-]", "C%10CC%10"], max_len).vocab


def test_tokenize_examples():
    v = _vocab()
    ids = tokenize("CC1.CC1", v)
    assert [v.tokens[i] for i in ids[:7]] == ["C", "C", "1", ".", "C", "C", "1"]
    assert ids[7:] == [v.pad_id] * (v.max_len - 7)
    assert tokenize("", v) == [v.pad_id] * v.max_len
    assert [v.tokens[i] for i in tokenize("CCl", v)[:2]] == ["C", "Cl"]


def test_tokenize_errors():
    v = _vocab(max_len=4)
    with pytest.raises(TokenizeError) as info:
        tokenize("CCS", v)
    assert info.value.position == 2
    with pytest.raises(TokenizeError):
        tokenize("CC1.CC1", v)


def test_detokenize_rules():
    v = _vocab()
    c = v.index("C")
    assert detokenize(tokenize("CC1.CC1", v), v) == "CC1.CC1"
    assert detokenize([v.pad_id] * v.max_len, v) == ""
    assert detokenize([c, v.pad_id, c], v) == "CC"


def test_build_vocab_examples(tmp_path):
    report = build_vocab(["CC", "CO"], 8)
    assert report.vocab.tokens == (PAD, "C", "O") and report.vocab.size == 3
    assert build_vocab(["CO", "CC"], 8).vocab == report.vocab
    long = build_vocab(["CC", "CCCCCCCCCC"], 4)
    assert long.excluded == [1] and long.coverage == 0.5
    with pytest.raises(ValueError):
        build_vocab([], 4)


def test_vocab_file_round_trip(tmp_path):
    v = _vocab()
    path = tmp_path / "vocab.txt"
    v.save(path)
    assert path.read_text(encoding="utf-8").startswith(f"L={v.max_len}\n{PAD}\n")
    assert Vocabulary.load(path) == v
    assert Vocabulary.load(path).sha256() == v.sha256()


def test_split_tokens_multichar():
    assert split_tokens("C[N+](=O)Br%12") == ["C", "[N+]", "(", "=", "O", ")", "Br", "%12"]
