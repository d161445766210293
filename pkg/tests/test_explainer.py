import datetime as dt

import numpy as np
import pytest

from referral_forge.corpus import ReferralRequest
from referral_forge.embedders import HashingEmbedder
from referral_forge.explainer import (
    PooledLinearScorer,
    RatingPolicy,
    calibrate_policy,
    completeness_residual,
    explain_request,
    integrated_gradients,
    load_policy,
    rate,
    save_policy,
    segment,
    sentence_attributions,
)
from referral_forge.model import LogisticModel, RequestScorer, train_l1
from referral_forge.text import combine_title_body, tokenize


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class ToyNonlinearScorer:
    """Sigmoid head plus a quadratic bump over the pooled tokens; the
    midpoint rule is inexact for the sigmoid part, with O(m^-2) error."""

    def __init__(self, w, v, c):
        self.w, self.v, self.c = w, v, c

    def score(self, x):
        pooled = x.mean(axis=0)
        return float(_sigmoid(self.w @ pooled) + self.c * (self.v @ pooled) ** 2)

    def gradient(self, x):
        t = x.shape[0]
        pooled = x.mean(axis=0)
        s = _sigmoid(float(self.w @ pooled))
        g = s * (1 - s) * self.w + 2 * self.c * float(self.v @ pooled) * self.v
        return np.tile(g / t, (t, 1))


def make_request(title="Need a referral", body="I am a [ROLE]. Thank you!"):
    return ReferralRequest(
        id="r1", date=dt.date(2024, 2, 2), masked_title=title, masked_body=body, label=False
    )


def simple_policy(weak_max=0.4, strong_min=0.6):
    return RatingPolicy(
        weak_max=weak_max,
        strong_min=strong_min,
        z_weak=-1.0,
        z_strong=1.0,
        length_edges=np.array([5.0, 10, 15, 20, 25, 30, 35, 40, 45]),
        bucket_shares=[np.linspace(0.1, 0.9, 21)] * 10,
    )


class TestSegment:
    def test_title_plus_two_sentences(self):
        spans = segment("My title", "A. B!")
        assert len(spans) == 3
        assert spans[0].is_title and not spans[1].is_title

    def test_mask_token_intact(self):
        spans = segment("t", "I am a [ROLE].")
        body = spans[1]
        tokens = tokenize(body.text)
        assert "[ROLE]" in tokens

    def test_partition_no_gaps_no_overlaps(self):
        rng = np.random.default_rng(0)
        pieces = ["Hello there.", "I am a [ROLE] in [LOCATION]!", "Thanks?", "Plain words", "A. B. C."]
        for _ in range(100):
            title = "Title words here"
            body = " ".join(pieces[i] for i in rng.integers(0, len(pieces), size=rng.integers(0, 4)))
            spans = segment(title, body)
            assert spans[0].start == 0
            for a, b in zip(spans, spans[1:]):
                assert a.end == b.start
            total = len(tokenize(combine_title_body(title, body)))
            assert spans[-1].end == total

    def test_empty_body_title_only(self):
        spans = segment("Just a title", "")
        assert len(spans) == 1 and spans[0].is_title

    def test_exactly_one_title_span(self):
        spans = segment("t", "A. B. C.")
        assert sum(1 for s in spans if s.is_title) == 1


class TestPooledLinearScorer:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        w = rng.normal(size=6)
        scorer = PooledLinearScorer(w, 0.4)
        for _ in range(20):
            x = rng.normal(size=(5, 6))
            grad = scorer.gradient(x)
            eps = 1e-6
            for t in range(5):
                for d0 in range(6):
                    xp = x.copy()
                    xp[t, d0] += eps
                    xm = x.copy()
                    xm[t, d0] -= eps
                    fd = (scorer.score(xp) - scorer.score(xm)) / (2 * eps)
                    assert abs(grad[t, d0] - fd) < 1e-5 * max(1.0, abs(fd))


class TestIntegratedGradients:
    def test_linear_closed_form_any_steps(self):
        rng = np.random.default_rng(2)
        w = rng.normal(size=8)
        scorer = PooledLinearScorer(w, 1.3)
        x = rng.normal(size=(6, 8))
        expected = x * (w / 6)
        for m in (1, 7, 64):
            attr = integrated_gradients(scorer, x, None, steps=m)
            assert np.max(np.abs(attr - expected)) < 1e-12

    def test_x_equals_baseline_zero(self):
        scorer = PooledLinearScorer(np.ones(4), 0.0)
        x = np.ones((3, 4))
        attr = integrated_gradients(scorer, x, x.copy(), steps=16)
        assert (attr == 0).all()

    def test_completeness_linear_exact(self):
        rng = np.random.default_rng(3)
        scorer = PooledLinearScorer(rng.normal(size=5), -0.7)
        x = rng.normal(size=(4, 5))
        attr = integrated_gradients(scorer, x, None, steps=32)
        assert completeness_residual(scorer, x, None, attr) < 1e-9

    def test_nonlinear_residual_shrinks_with_steps(self):
        rng = np.random.default_rng(21)
        d, t = 6, 4
        scorer = ToyNonlinearScorer(
            rng.normal(size=d) * 2.5, rng.normal(size=d) * 0.8, 0.7
        )
        x = rng.normal(size=(t, d)) * 1.5
        residuals = {}
        for m in (16, 64, 256):
            attr = integrated_gradients(scorer, x, None, steps=m)
            residuals[m] = completeness_residual(scorer, x, None, attr)
        assert residuals[64] < 1e-3
        assert residuals[256] < residuals[64] < residuals[16]

    def test_shape_mismatch_errors(self):
        scorer = PooledLinearScorer(np.ones(3), 0.0)
        with pytest.raises(ValueError, match="shape"):
            integrated_gradients(scorer, np.zeros((2, 3)), np.zeros((3, 3)))

    def test_bad_steps_errors(self):
        scorer = PooledLinearScorer(np.ones(3), 0.0)
        with pytest.raises(ValueError, match="steps"):
            integrated_gradients(scorer, np.zeros((2, 3)), None, steps=0)


class TestSentenceAttributions:
    def _spans(self, sizes):
        spans = []
        pos = 0
        for i, size in enumerate(sizes):
            spans.append(
                type("S", (), {"start": pos, "end": pos + size, "is_title": i == 0, "text": ""})()
            )
            pos += size
        return spans

    def test_single_span_share_one(self):
        attr = np.ones((4, 3))
        raw, shares, degenerate = sentence_attributions(attr, self._spans([4]))
        assert shares == [1.0] and not degenerate

    def test_three_to_one_split(self):
        token_scores = np.array([3.0, 1.0])
        raw, shares, _ = sentence_attributions(token_scores, self._spans([1, 1]))
        assert shares == pytest.approx([0.75, 0.25])

    def test_shares_sum_to_one_fuzz(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            sizes = rng.integers(1, 5, size=rng.integers(1, 6))
            scores = np.abs(rng.normal(size=int(sizes.sum()))) + 0.01
            _, shares, degenerate = sentence_attributions(scores, self._spans(list(sizes)))
            assert not degenerate
            assert sum(shares) == pytest.approx(1.0, abs=1e-6)

    def test_zero_total_degenerate(self):
        scores = np.array([1.0, -1.0])
        _, shares, degenerate = sentence_attributions(scores, self._spans([1, 1]))
        assert degenerate and shares is None

    def test_negative_total_normalized_by_abs(self):
        scores = np.array([-3.0, 1.0])
        _, shares, degenerate = sentence_attributions(scores, self._spans([1, 1]))
        assert degenerate
        assert shares == pytest.approx([-0.75, 0.25])

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        scores = np.abs(rng.normal(size=6)) + 0.1
        spans = self._spans([2, 2, 2])
        _, shares1, _ = sentence_attributions(scores, spans)
        _, shares2, _ = sentence_attributions(scores * 7.3, spans)
        assert shares1 == pytest.approx(shares2)


class TestRate:
    def test_overall_thresholds(self):
        spans = segment("t", "A. B.")
        policy = simple_policy()
        shares = [0.34, 0.33, 0.33]
        assert rate(0.2, shares, spans, policy)[0] == "weak"
        assert rate(0.5, shares, spans, policy)[0] == "moderate"
        assert rate(0.9, shares, spans, policy)[0] == "strong"

    def test_dominant_sentence_strong(self):
        # one sentence holding 0.9 of 5 spans has z = 2 -> strong
        spans = segment("t", "A. B. C. D.")
        shares = [0.025, 0.9, 0.025, 0.025, 0.025]
        overall, _title, sentences = rate(0.5, shares, spans, simple_policy())
        assert overall == "moderate"
        assert sentences[0] == "strong"

    def test_weak_overall_all_equal_shares(self):
        spans = segment("t", "A. B. C.")
        shares = [0.25, 0.25, 0.25, 0.25]
        overall, _title, sentences = rate(0.1, shares, spans, simple_policy())
        assert overall == "weak"
        assert all(r in ("weak", "moderate") for r in sentences)
        assert all(r == "weak" for r in sentences)  # moderate shifted toward weak

    def test_strong_overall_shifts_up(self):
        spans = segment("t", "A. B. C.")
        shares = [0.25, 0.25, 0.25, 0.25]
        _overall, _title, sentences = rate(0.9, shares, spans, simple_policy())
        assert all(r == "strong" for r in sentences)

    def test_title_median_share_moderate(self):
        spans = segment("My title", "A. B.")
        policy = simple_policy()
        median_share = 0.5  # exact median of linspace(0.1, 0.9, 21)
        shares = [median_share, 0.3, 0.2]
        _overall, title_rating, _ = rate(0.5, shares, spans, policy)
        assert title_rating == "moderate"

    def test_title_extreme_shares(self):
        spans = segment("My title", "A. B.")
        policy = simple_policy()
        assert rate(0.5, [0.95, 0.03, 0.02], spans, policy)[1] == "strong"
        assert rate(0.5, [0.01, 0.5, 0.49], spans, policy)[1] == "weak"

    def test_degenerate_shares_all_moderate(self):
        spans = segment("t", "A. B.")
        overall, title_rating, sentences = rate(0.9, None, spans, simple_policy())
        assert overall == "strong"
        assert title_rating == "moderate"
        assert sentences == ["moderate", "moderate"]

    def test_deterministic(self):
        spans = segment("t", "A. B. C.")
        shares = [0.4, 0.3, 0.2, 0.1]
        r1 = rate(0.5, shares, spans, simple_policy())
        r2 = rate(0.5, shares, spans, simple_policy())
        assert r1 == r2


def trained_hash_scorer(seed=0, dim=32, n=80):
    """A tiny reward model trained on hash embeddings so the IG path is
    exercised with a real head."""
    rng = np.random.default_rng(seed)
    embedder = HashingEmbedder(dimension=dim)
    good = ["thank you so much for reading", "please consider referring me kindly"]
    bad = ["give me a referral now", "nobody ever helps here anyway"]
    texts, labels = [], []
    for i in range(n):
        positive = i % 2 == 0
        pool = good if positive else bad
        texts.append(pool[int(rng.integers(0, len(pool)))] + f" extra {i % 7}")
        labels.append(1.0 if positive else 0.0)
    X = np.stack([embedder.embed(t).values for t in texts])
    model = train_l1(X, np.array(labels), 0.001, encoder_id=embedder.name)
    scorer = RequestScorer(model=model, encode=lambda t: embedder.embed(t).values)
    return scorer, embedder


class TestExplainRequest:
    def test_ig_method_selected_with_token_capability(self):
        scorer, embedder = trained_hash_scorer()
        report = explain_request(make_request(), scorer, embedder, simple_policy(), steps=8)
        assert report.method == "ig"
        assert report.completeness is not None and report.completeness < 1e-9

    def test_occlusion_fallback_without_tokens(self):
        class NoTokenEmbedder:
            name = "no-tokens"

            def __init__(self, inner):
                self.inner = inner

            def embed(self, text):
                return self.inner.embed(text)

            def has_token_embeddings(self):
                return False

        scorer, embedder = trained_hash_scorer()
        wrapped = NoTokenEmbedder(embedder)
        scorer.encode = lambda t: wrapped.embed(t).values
        report = explain_request(make_request(), scorer, wrapped, simple_policy(), steps=8)
        assert report.method == "occlusion"
        assert report.completeness is None

    def test_shares_sum_to_one(self):
        scorer, embedder = trained_hash_scorer()
        report = explain_request(
            make_request(body="Thank you. Please help me. I am ready."),
            scorer,
            embedder,
            simple_policy(),
            steps=8,
        )
        if not report.degenerate:
            assert sum(report.shares) == pytest.approx(1.0, abs=1e-6)
        assert len(report.sentence_ratings) == len(report.spans) - 1

    def test_deterministic(self):
        scorer, embedder = trained_hash_scorer()
        r1 = explain_request(make_request(), scorer, embedder, simple_policy(), steps=8)
        r2 = explain_request(make_request(), scorer, embedder, simple_policy(), steps=8)
        assert r1 == r2


class TestCalibratePolicy:
    def _uniform_requests(self, n=200):
        requests = []
        table = {}
        rng = np.random.default_rng(6)
        grid = np.linspace(0.001, 0.999, n)
        for i in range(n):
            words = " ".join(f"w{int(v)}" for v in rng.integers(0, 50, size=rng.integers(5, 30)))
            r = ReferralRequest(
                id=f"r{i}",
                date=dt.date(2024, 1, 1),
                masked_title=f"title {i}",
                masked_body=words + ". " + words[: max(3, len(words) // 2)] + ".",
                label=True,
            )
            requests.append(r)
            table[combine_title_body(r.masked_title, r.masked_body)] = float(grid[i])
        return requests, table

    def _scorer(self, table):
        class TableScorer:
            model = LogisticModel(np.zeros(1), 0.0, 0.0, "table")

            def score_text(self, text):
                return table.get(text, 0.5)

            def score(self, title, body):
                return self.score_text(combine_title_body(title, body))

        return TableScorer()

    def test_uniform_p_terciles(self):
        requests, table = self._uniform_requests()
        scorer = self._scorer(table)
        embedder = HashingEmbedder(dimension=16)  # name differs from encoder_id -> occlusion
        policy = calibrate_policy(requests, scorer, embedder, steps=4)
        assert policy.weak_max == pytest.approx(1 / 3, abs=0.02)
        assert policy.strong_min == pytest.approx(2 / 3, abs=0.02)

    def test_calibrate_twice_identical(self):
        requests, table = self._uniform_requests(80)
        scorer = self._scorer(table)
        embedder = HashingEmbedder(dimension=16)
        p1 = calibrate_policy(requests, scorer, embedder, steps=4)
        p2 = calibrate_policy(requests, scorer, embedder, steps=4)
        assert p1.weak_max == p2.weak_max
        assert np.array_equal(p1.length_edges, p2.length_edges)
        assert all(np.array_equal(a, b) for a, b in zip(p1.bucket_shares, p2.bucket_shares))

    def test_every_length_falls_in_a_bucket(self):
        requests, table = self._uniform_requests(120)
        scorer = self._scorer(table)
        policy = calibrate_policy(requests, scorer, HashingEmbedder(dimension=16), steps=4)
        from referral_forge.explainer import _bucket_for_length

        for length in [0, 1, 5, 17, 40, 100, 10_000]:
            bucket = _bucket_for_length(policy, length)
            assert len(bucket) > 0

    def test_too_small_corpus_errors(self):
        requests, table = self._uniform_requests(30)
        with pytest.raises(ValueError, match="at least 50"):
            calibrate_policy(requests, self._scorer(table), HashingEmbedder(dimension=16))

    def test_policy_round_trip(self, tmp_path):
        requests, table = self._uniform_requests(60)
        policy = calibrate_policy(
            requests, self._scorer(table), HashingEmbedder(dimension=16), steps=4
        )
        path = tmp_path / "policy.json"
        save_policy(policy, path)
        loaded = load_policy(path)
        assert loaded.weak_max == policy.weak_max
        assert np.array_equal(loaded.length_edges, policy.length_edges)
