from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gendistill.corpus import Dataset, Example, load_desk_dataset
from gendistill.generator import (NgramModel, SamplerConfig, apply_sampling_filters,
                                  draw_tokens, fit_generator, fit_sequences, generate_corpus,
                                  sample_ids, sample_text, synthetic_rows)
from gendistill.numerics import Rng
from gendistill.tokenizer import BOS, EOS, PAD, learn_bpe


@pytest.fixture(scope="module")
def toy():
    # merges ("a","▁") and ("b","▁") make every word one token
    vocab = learn_bpe(["a b a b a"], target_vocab=9)
    a, b = vocab.encode("a").ids[0], vocab.encode("b").ids[0]
    return vocab, a, b


@pytest.fixture(scope="module")
def desk():
    train, _ = load_desk_dataset()
    vocab = learn_bpe(train, 4096)
    return train, vocab, fit_generator(train, vocab, order=4, discount=0.75)


def brute_force_dist(seqs, vocab_size, order, d, history):
    """Independent smoothing calculator in exact rationals.

    Counts are taken by scanning the raw sequences for each query, and the
    recursion runs from the shortest suffix upward.
    """
    support = [w for w in range(vocab_size) if w not in (PAD, BOS)]
    d = Fraction(d)

    def count(ctx, w):
        k = len(ctx)
        n = 0
        for s in seqs:
            for i in range(max(k, 1), len(s)):  # BOS is never a target
                if tuple(s[i - k:i]) == ctx and s[i] == w:
                    n += 1
        return n

    def prob(w, k):
        if k == 0:
            return Fraction(1, len(support)) if w in support else Fraction(0)
        ctx = tuple(history[len(history) - (k - 1):]) if k > 1 else ()
        if len(history) < k - 1:
            return prob(w, k - 1)
        succ = {v: count(ctx, v) for v in range(vocab_size)}
        total = sum(succ.values())
        if total == 0:
            return prob(w, k - 1)
        distinct = sum(1 for c in succ.values() if c > 0)
        return max(Fraction(succ[w]) - d, Fraction(0)) / total + d * distinct / total * prob(w, k - 1)

    return [prob(w, order) for w in range(vocab_size)]


class TestToyOracle:
    def test_hand_counts_at_zero_discount(self, toy):
        vocab, a, b = toy
        m = fit_generator(["a b a b a"], vocab, order=2, discount=0.0)
        pa = m.next_token_dist([BOS, a])
        pb = m.next_token_dist([BOS, a, b])
        assert pa[b] == 2 / 3
        assert pa[EOS] == 1 / 3
        assert pb[a] == 1.0
        assert pa.sum() == pytest.approx(1.0, abs=1e-15)

    def test_closed_form_half_discount(self, toy):
        vocab, a, b = toy
        m = fit_generator(["a b a b a"], vocab, order=2, discount=0.5)
        # unigram targets: a x3, b x2, EOS x1; uniform floor over 9 - 2 tokens
        p_uni_b = (2 - 0.5) / 6 + (0.5 * 3 / 6) * (1 / 7)
        expected = (2 - 0.5) / 3 + (0.5 * 2 / 3) * p_uni_b
        assert m.next_token_dist([BOS, a])[b] == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("d", [0.0, 0.5, 0.75])
    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_matches_brute_force(self, toy, d, order):
        vocab, a, b = toy
        seq = vocab.encode("a b a b a", frame=True).ids
        m = fit_sequences([seq], order, d, len(vocab))
        for hist in ([BOS], [BOS, a], [BOS, a, b], [BOS, a, b, a], [b, b, b], [EOS, a]):
            exact = brute_force_dist([seq], len(vocab), order, d, hist)
            got = m.next_token_dist(hist)
            np.testing.assert_allclose(got, [float(x) for x in exact], rtol=0, atol=1e-12)

    def test_brute_force_on_random_sequences(self):
        rng = Rng(3)
        V = 9
        seqs = [[BOS] + list(rng.integers(3, V, size=rng.integers(1, 8))) + [EOS]
                for _ in range(6)]
        m = fit_sequences(seqs, 3, 0.75, V)
        for _ in range(10):
            hist = [BOS] + list(rng.integers(3, V, size=rng.integers(0, 4)))
            exact = brute_force_dist(seqs, V, 3, 0.75, hist)
            np.testing.assert_allclose(m.next_token_dist(hist), [float(x) for x in exact],
                                       rtol=0, atol=1e-12)

    def test_unseen_context_falls_through_to_unigram(self, toy):
        vocab, a, b = toy
        m = fit_generator(["a b a b a"], vocab, order=2, discount=0.75)
        np.testing.assert_array_equal(m.next_token_dist([EOS]), m.next_token_dist([]))

    def test_pad_and_bos_never_predicted(self, toy):
        vocab, a, b = toy
        m = fit_generator(["a b a b a"], vocab, order=3, discount=0.75)
        p = m.next_token_dist([BOS, a])
        assert p[PAD] == 0.0 and p[BOS] == 0.0


def test_normalisation_on_1000_random_contexts(desk):
    _, vocab, m = desk
    rng = Rng(0, "contexts")
    seen = [list(c) for c in list(m.tables[3])[:500]]
    for i in range(1000):
        if i % 2:
            hist = seen[i % len(seen)]
        else:
            hist = [BOS] + list(rng.integers(0, len(vocab), size=rng.integers(0, 5)))
        p = m.next_token_dist(hist)
        assert abs(p.sum() - 1.0) <= 1e-9
        assert np.all(p >= 0)


def test_refit_is_identical_and_label_blind(desk):
    train, vocab, m = desk
    perm = Rng(1).permutation(len(train))
    relabeled = Dataset([Example(ex.text, int(train.labels[j]), ex.id)
                         for ex, j in zip(train.examples, perm)], train.class_names)
    m2 = fit_generator(relabeled, vocab, 4, 0.75)
    for t1, t2 in zip(m.tables, m2.tables):
        assert t1.keys() == t2.keys()
        for ctx in t1:
            for x, y in zip(t1[ctx], t2[ctx]):
                assert np.array_equal(x, y)


def test_empty_texts_skipped_with_count(toy):
    vocab, _, _ = toy
    m = fit_generator(["a b", "", "   ", "b a"], vocab, order=2)
    assert m.n_skipped == 2


def test_order_validation(toy):
    vocab, _, _ = toy
    with pytest.raises(ValueError):
        fit_generator(["a b"], vocab, order=0)


def test_save_load_round_trip(tmp_path, desk):
    _, vocab, m = desk
    m.save(tmp_path / "g.lm")
    m2 = NgramModel.load(tmp_path / "g.lm", vocab=vocab)
    for hist in ([BOS], [BOS, 10, 11], [5, 6, 7]):
        np.testing.assert_array_equal(m.next_token_dist(hist), m2.next_token_dist(hist))
    m2.save(tmp_path / "g2.lm")
    assert (tmp_path / "g.lm").read_bytes() == (tmp_path / "g2.lm").read_bytes()


class TestSampling:
    def test_chi_square_100k_draws_fixed_context(self, desk):
        _, vocab, m = desk
        hist = [BOS] + list(vocab.encode(load_desk_dataset()[0].texts[0]).ids[:2])
        p = m.next_token_dist(hist)
        draws = draw_tokens(p, Rng(0, "chi2").random(100_000))
        observed = np.bincount(draws, minlength=len(p)).astype(float)
        expected = 100_000 * p
        # pool every bin with expected count < 5 into one
        big = expected >= 5
        obs = np.append(observed[big], observed[~big].sum())
        exp = np.append(expected[big], expected[~big].sum())
        assert stats.chisquare(obs, exp).pvalue > 0.001

    def test_empirical_frequencies_within_three_stderr(self, toy):
        vocab, a, b = toy
        m = fit_generator(["a b a b a"], vocab, order=2, discount=0.5)
        p = m.next_token_dist([BOS, a])
        n = 100_000
        freq = np.bincount(draw_tokens(p, Rng(1).random(n)), minlength=len(p)) / n
        se = np.sqrt(p * (1 - p) / n)
        assert np.all(np.abs(freq - p) <= 3 * se + 1e-12)

    def test_tiny_temperature_is_greedy(self, desk):
        _, vocab, m = desk
        hist = [BOS]
        for _ in range(40):
            tok = int(np.argmax(m.next_token_dist(hist)))
            if tok == EOS:
                break
            hist.append(tok)
        for seed in range(3):
            ids, _ = sample_ids(m, SamplerConfig(temperature=1e-6, max_tokens=40), Rng(seed))
            assert ids == hist[1:]

    def test_top_p_one_is_identity(self, desk):
        _, _, m = desk
        for i in range(5):
            assert (sample_text(m, SamplerConfig(seed=3), i)
                    == sample_text(m, SamplerConfig(seed=3, top_p=1.0), i))

    def test_top_k_keeps_k_most_probable(self):
        p = np.array([0.0, 0.0, 0.1, 0.4, 0.2, 0.3])
        q = apply_sampling_filters(p, SamplerConfig(top_k=2))
        np.testing.assert_allclose(q, [0, 0, 0, 4 / 7, 0, 3 / 7])

    def test_top_p_smallest_prefix(self):
        p = np.array([0.0, 0.0, 0.1, 0.4, 0.2, 0.3])
        q = apply_sampling_filters(p, SamplerConfig(top_p=0.7))
        np.testing.assert_allclose(q, [0, 0, 0, 4 / 7, 0, 3 / 7])
        q = apply_sampling_filters(p, SamplerConfig(top_p=0.71))
        np.testing.assert_allclose(q, [0, 0, 0, 4 / 9, 2 / 9, 3 / 9])

    def test_temperature_is_power_renormalised(self):
        p = np.array([0.0, 0.0, 0.2, 0.8])
        q = apply_sampling_filters(p, SamplerConfig(temperature=0.5))
        np.testing.assert_allclose(q, [0, 0, 0.04 / 0.68, 0.64 / 0.68], atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=12).filter(lambda x: sum(x) > 0),
           st.floats(0.05, 5.0), st.one_of(st.none(), st.integers(1, 12)),
           st.one_of(st.none(), st.floats(0.01, 1.0)))
    def test_filters_return_distribution(self, raw, T, k, top_p):
        if k is not None and top_p is not None:
            top_p = None
        p = np.array(raw) / sum(raw)
        q = apply_sampling_filters(p, SamplerConfig(temperature=T, top_k=k, top_p=top_p))
        assert abs(q.sum() - 1) < 1e-12
        assert np.all(q[p == 0] == 0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(temperature=0)
        with pytest.raises(ValueError):
            SamplerConfig(top_k=3, top_p=0.5)
        with pytest.raises(ValueError):
            SamplerConfig(top_p=0.0)
        with pytest.raises(ValueError):
            SamplerConfig(max_tokens=0)


class TestGenerateCorpus:
    def test_size_determinism_and_prefix_stability(self, desk):
        train, _, m = desk
        cfg = SamplerConfig(seed=11)
        big = generate_corpus(m, 30, cfg, train.class_names, train.texts)
        small = generate_corpus(m, 12, cfg, train.class_names, train.texts)
        assert len(big) == 30
        assert big.texts[:12] == small.texts
        assert big.meta["sample_seeds"][:12] == small.meta["sample_seeds"]
        assert all(t.strip() for t in big.texts)
        assert all(lab == -1 for lab in big.labels)
        assert 0.0 <= big.meta["memorization_rate"] <= 1.0

    def test_single_sample_reproducible(self, desk):
        train, _, m = desk
        cfg = SamplerConfig(seed=5)
        assert (generate_corpus(m, 1, cfg, train.class_names).texts
                == generate_corpus(m, 1, cfg, train.class_names).texts)

    def test_max_tokens_cap(self, desk):
        train, vocab, m = desk
        ds = generate_corpus(m, 20, SamplerConfig(max_tokens=5), train.class_names)
        assert all(len(vocab.encode(t)) <= 5 for t in ds.texts)

    def test_rows_schema(self, desk):
        train, _, m = desk
        rows = synthetic_rows(generate_corpus(m, 3, SamplerConfig(), train.class_names))
        assert [sorted(r) for r in rows] == [["label", "sample_seed", "text"]] * 3
        assert all(r["label"] == "unlabeled" and isinstance(r["sample_seed"], int) for r in rows)

    def test_rejects_zero(self, desk):
        train, _, m = desk
        with pytest.raises(ValueError):
            generate_corpus(m, 0, SamplerConfig(), train.class_names)

    def test_memorizing_generator_is_flagged(self, caplog):
        texts = ["alpha beta gamma delta", "beta gamma"]
        vocab = learn_bpe(texts, 60)
        m = fit_generator(texts, vocab, order=4, discount=0.0)
        ds = generate_corpus(m, 50, SamplerConfig(), ["x", "y"], texts)
        assert ds.meta["memorization_rate"] > 0.05
        assert "copy a training text" in caplog.text
