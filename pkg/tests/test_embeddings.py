import io

import numpy as np
import pytest

from treesent.embeddings import (
    UNK_TOKEN,
    EmbeddingFormatError,
    Vocabulary,
    build_vocabulary,
    load_embeddings,
    lookup,
)
from treesent.lexicon import PolarDictionary
from treesent.trees import label_scheme, parse_sexpr

BINARY = label_scheme("binary", sentence_level_only=True)


class TestVocabulary:
    def test_unk_reserved_at_zero(self):
        vocab = Vocabulary(["a", "b", "a"])
        assert vocab.index(UNK_TOKEN) == 0
        assert vocab.index("a") == 1
        assert vocab.index("b") == 2
        assert len(vocab) == 3

    def test_unseen_token_maps_to_unk(self):
        vocab = Vocabulary(["a"])
        assert vocab.index("zzz") == 0

    def test_build_includes_dictionary_surface_tokens(self):
        tree = parse_sexpr("(P (x good) (x day))", BINARY)
        d = PolarDictionary(entries={"not nice": 0}, n_negative=1)
        vocab = build_vocabulary([tree], d)
        for tok in ("good", "day", "not", "nice"):
            assert tok in vocab

    def test_hash_is_order_sensitive_and_stable(self):
        assert Vocabulary(["a", "b"]).sha256() == Vocabulary(["a", "b"]).sha256()
        assert Vocabulary(["a", "b"]).sha256() != Vocabulary(["b", "a"]).sha256()


class TestLoadEmbeddings:
    def test_file_row_copied(self):
        vocab = Vocabulary(["good"])
        table = load_embeddings(io.StringIO("good 0.1 0.2\n"), vocab, 2, seed=0)
        assert np.allclose(table[vocab.index("good")], [0.1, 0.2])

    def test_unk_and_missing_rows_seeded_uniform(self):
        vocab = Vocabulary(["good", "bad"])
        a = load_embeddings(io.StringIO("good 0.1 0.2\n"), vocab, 2, seed=5)
        b = load_embeddings(io.StringIO("good 0.1 0.2\n"), vocab, 2, seed=5)
        assert np.array_equal(a, b)
        assert np.all(np.abs(a[vocab.index("bad")]) <= 0.05)
        assert np.all(np.abs(a[0]) <= 0.05)

    def test_empty_file_reproducible(self):
        vocab = Vocabulary(["a", "b"])
        a = load_embeddings(io.StringIO(""), vocab, 4, seed=9)
        b = load_embeddings(io.StringIO(""), vocab, 4, seed=9)
        c = load_embeddings(io.StringIO(""), vocab, 4, seed=10)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_dimension_mismatch(self):
        vocab = Vocabulary(["good"])
        with pytest.raises(EmbeddingFormatError, match="expected 2"):
            load_embeddings(io.StringIO("good 0.1\n"), vocab, 2, seed=0)

    def test_non_numeric_component(self):
        vocab = Vocabulary(["good"])
        with pytest.raises(EmbeddingFormatError, match="non-numeric"):
            load_embeddings(io.StringIO("good 0.1 oops\n"), vocab, 2, seed=0)

    def test_count_header_skipped(self):
        vocab = Vocabulary(["good"])
        table = load_embeddings(io.StringIO("7 2\ngood 0.3 0.4\n"),
                                vocab, 2, seed=0)
        assert np.allclose(table[vocab.index("good")], [0.3, 0.4])

    def test_tokens_not_in_vocab_ignored(self):
        vocab = Vocabulary(["good"])
        table = load_embeddings(io.StringIO("other 9.0 9.0\n"), vocab, 2, seed=0)
        assert np.all(np.abs(table) <= 0.05)


class TestLookup:
    def test_known_and_unknown(self):
        vocab = Vocabulary(["good"])
        table = load_embeddings(io.StringIO("good 0.1 0.2\n"), vocab, 2, seed=0)
        assert np.allclose(lookup(vocab, table, "good"), [0.1, 0.2])
        assert np.array_equal(lookup(vocab, table, "zzz"), table[0])

    def test_lookup_deterministic(self):
        vocab = Vocabulary(["good"])
        table = load_embeddings(io.StringIO(""), vocab, 3, seed=1)
        assert np.array_equal(lookup(vocab, table, "good"),
                              lookup(vocab, table, "good"))
