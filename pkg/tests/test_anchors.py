"""Anchor mining tests: tokenizer rules, tagger, filter oracle, embeddings."""

import numpy as np
import pytest

from signtrans import anchors as an


class TestTokenize:
    def test_empty(self):
        assert an.tokenize("") == []

    def test_punctuation_split(self):
        assert an.tokenize("Snow falls.") == ["snow", "falls", "."]

    def test_contraction_split(self):
        assert an.tokenize("it's cold") == ["it", "'s", "cold"]

    def test_quotes_are_not_clitics(self):
        assert an.tokenize("'hello'") == ["'", "hello", "'"]


class TestPosTag:
    def test_lexicon_hit(self):
        assert an.pos_tag(["snow"]) == ["NN"]

    def test_ing_suffix(self):
        assert an.pos_tag(["blorping"]) == ["VBG"]

    def test_ed_suffix(self):
        assert an.pos_tag(["zorped"]) == ["VBD"]

    def test_plural_of_known_noun(self):
        assert an.pos_tag(["cats"]) == ["NNS"]

    def test_capitalized_unknown(self):
        assert an.pos_tag(["Kzlomir"]) == ["NNP"]

    def test_fallback(self):
        assert an.pos_tag(["zzqx"]) == ["NN"]

    def test_pretagged_passthrough(self, tmp_path):
        p = tmp_path / "tagged.tsv"
        p.write_text("Snow\tNN\nblorps\tVBZ\n\nrain\tNN\n", encoding="utf-8")
        sents = an.read_pretagged_tsv(p)
        assert [s.tokens for s in sents] == [["snow", "blorps"], ["rain"]]
        assert [s.tags for s in sents] == [["NN", "VBZ"], ["NN"]]


def build_fixture_corpus():
    """100 deterministic sentences with controlled word frequencies.

    - "glacier" occurs exactly 10 times (boundary: excluded)
    - "blizzard" occurs exactly 11 times (included under VN via NN)
    - "report" appears in 95 samples (excluded by the doc-fraction rule)
    - assorted verbs/nouns/adjectives with mid frequencies
    """
    sentences = []
    for i in range(100):
        words = ["the"]
        if i < 95:
            words += ["report"]
        if i < 10:
            words += ["glacier"]
        if i < 11:
            words += ["blizzard"]
        if i % 2 == 0:
            words += ["snow", "falls"]
        if i % 3 == 0:
            words += ["rain", "moved", "east"]
        if i % 4 == 0:
            words += ["cold", "winter", "quickly"]
        if i % 5 == 0:
            words += ["meteorologists", "say"]
        words += ["today"]
        sentences.append(" ".join(words) + ".")
    return sentences


def brute_force_recount(sentences, tagset, min_count=10, max_doc_fraction=0.9):
    """Independent re-derivation of the anchor filter used as an oracle."""
    from collections import Counter

    tagged = []
    for idx, s in enumerate(sentences):
        toks = an.tokenize_cased(s)
        tags = an.pos_tag(toks)
        tagged.append((idx, [t.lower() for t in toks], tags))

    if isinstance(tagset, str):
        tagset = an.TAG_PRESETS[tagset]
    occurrence = Counter()
    documents = {}
    eligible = set()
    for idx, toks, tags in tagged:
        for tok, tag in zip(toks, tags):
            occurrence[tok] += 1
            documents.setdefault(tok, set()).add(idx)
            if tag in tagset:
                eligible.add(tok)
    result = []
    for word in eligible:
        if occurrence[word] <= min_count:
            continue
        if len(documents[word]) >= max_doc_fraction * len(sentences):
            continue
        result.append(word)
    result.sort(key=lambda w: (-occurrence[w], w))
    return result, {w: occurrence[w] for w in result}, {w: len(documents[w]) for w in result}


class TestSelectAnchors:
    def test_count_exactly_min_is_excluded(self):
        corpus = an.tag_corpus(build_fixture_corpus())
        vocab = an.select_anchors(corpus, "VN", min_count=10)
        assert "glacier" not in vocab.words
        assert "blizzard" in vocab.words

    def test_doc_fraction_excludes_ubiquitous_words(self):
        corpus = an.tag_corpus(build_fixture_corpus())
        vocab = an.select_anchors(corpus, "VN", min_count=10, max_doc_fraction=0.9)
        assert "report" not in vocab.words
        wide = an.select_anchors(corpus, "VN", min_count=10, max_doc_fraction=1.0)
        assert "report" in wide.words

    def test_empty_tagset(self):
        corpus = an.tag_corpus(["snow falls", "rain falls"])
        assert len(an.select_anchors(corpus, frozenset())) == 0

    def test_empty_corpus(self):
        assert len(an.select_anchors([], "VN")) == 0

    @pytest.mark.parametrize("preset", ["V", "N", "VN", "VNA"])
    def test_matches_brute_force_recount(self, preset):
        sentences = build_fixture_corpus()
        corpus = an.tag_corpus(sentences)
        vocab = an.select_anchors(corpus, preset)
        words, counts, docs = brute_force_recount(sentences, preset)
        assert vocab.words == words
        assert vocab.counts == [counts[w] for w in words]
        assert vocab.doc_counts == [docs[w] for w in words]

    def test_permutation_invariance(self):
        sentences = build_fixture_corpus()
        fwd = an.select_anchors(an.tag_corpus(sentences), "VN")
        rev = an.select_anchors(an.tag_corpus(sentences[::-1]), "VN")
        assert fwd.words == rev.words
        assert fwd.counts == rev.counts

    def test_vn_words_carry_v_or_n_tags(self):
        corpus = an.tag_corpus(build_fixture_corpus())
        v = set(an.select_anchors(corpus, "V").words)
        n = set(an.select_anchors(corpus, "N").words)
        vn = set(an.select_anchors(corpus, "VN").words)
        assert vn <= (v | n)

    def test_every_word_recountable_above_min(self):
        sentences = build_fixture_corpus()
        corpus = an.tag_corpus(sentences)
        vocab = an.select_anchors(corpus, "VN", min_count=10)
        blob = " ".join(an.tokenize(s) and " ".join(an.tokenize(s)) for s in sentences).split()
        for w in vocab.words:
            assert blob.count(w) > 10

    def test_tsv_round_trip(self, tmp_path):
        corpus = an.tag_corpus(build_fixture_corpus())
        vocab = an.select_anchors(corpus, "VN")
        path = tmp_path / "anchors.tsv"
        vocab.to_tsv(path)
        again = an.AnchorVocab.from_tsv(path)
        assert again.words == vocab.words
        assert again.counts == vocab.counts
        assert again.doc_counts == vocab.doc_counts


class TestEmbeddings:
    def test_direct_copy(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("a 1.0 2.0\n", encoding="utf-8")
        vocab = an.AnchorVocab(["a"], [12], [5])
        init = an.load_pretrained_embeddings(f, vocab)
        np.testing.assert_array_equal(init.matrix, [[1.0, 2.0]])
        assert init.d_ca == 2
        assert list(init.oov_mask) == [False]

    def test_oov_rows_bounded_and_flagged(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("a 1.0 2.0\n", encoding="utf-8")
        vocab = an.AnchorVocab(["zzz"], [12], [5])
        init = an.load_pretrained_embeddings(f, vocab, seed=3)
        assert init.oov_mask[0]
        assert (np.abs(init.matrix[0]) <= 0.1).all()

    def test_loaded_rows_bitwise_equal(self, tmp_path):
        rng = np.random.default_rng(0)
        words = [f"word{i}" for i in range(10)]
        rows = rng.normal(size=(10, 4))
        f = tmp_path / "vec.txt"
        f.write_text(
            "".join(
                f"{w} {' '.join(repr(float(x)) for x in row)}\n" for w, row in zip(words, rows)
            ),
            encoding="utf-8",
        )
        vocab = an.AnchorVocab(list(words), [20] * 10, [5] * 10)
        init = an.load_pretrained_embeddings(f, vocab)
        expected = np.array([[float(repr(float(x))) for x in row] for row in rows])
        assert (init.matrix == expected).all()

    def test_no_path_randomizes_all(self):
        vocab = an.AnchorVocab(["a", "b"], [12, 11], [3, 3])
        init = an.load_pretrained_embeddings(None, vocab, d_ca=7, seed=1)
        assert init.matrix.shape == (2, 7)
        assert init.oov_mask.all()
        again = an.load_pretrained_embeddings(None, vocab, d_ca=7, seed=1)
        np.testing.assert_array_equal(init.matrix, again.matrix)

    def test_inconsistent_width_names_line(self, tmp_path):
        f = tmp_path / "vec.txt"
        f.write_text("a 1.0 2.0\nb 3.0\n", encoding="utf-8")
        vocab = an.AnchorVocab(["a", "b"], [12, 11], [3, 3])
        with pytest.raises(ValueError, match="line 2"):
            an.load_pretrained_embeddings(f, vocab)
