import json
import math
from itertools import permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdlab.errors import InvalidInputError, MissingFieldError, UndefinedMetricError
from kdlab.textmetrics import (
    bleu,
    confidence_summary,
    distinct_n,
    evaluate_generations,
    lcs_length,
    parse_generation,
    read_generations,
    rouge_l,
    self_bleu,
)

A = list("abcd")
B = list("abce")
C = list("axcd")

tokens = st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=12)


def oracle_bleu(cand, refs, max_n):
    # brute force: enumerate n-gram positions, no shared helpers
    precisions = []
    for n in range(1, min(max_n, len(cand)) + 1):
        grams = [tuple(cand[i:i + n]) for i in range(len(cand) - n + 1)]
        hits = 0
        for g in set(grams):
            ref_max = max(sum(1 for i in range(len(r) - n + 1) if tuple(r[i:i + n]) == g) for r in refs)
            hits += min(grams.count(g), ref_max)
        precisions.append(hits / len(grams) if hits else 1e-9 / len(grams))
    closest = sorted(refs, key=lambda r: (abs(len(r) - len(cand)), len(r)))[0]
    bp = 1.0 if len(cand) > len(closest) else math.exp(1 - len(closest) / len(cand))
    return bp * math.prod(precisions) ** (1 / len(precisions))


class TestRougeL:
    def test_identical(self):
        assert rouge_l(A, A) == 1.0

    def test_disjoint(self):
        assert rouge_l(A, list("wxyz")) == 0.0

    def test_hand_example(self):
        assert rouge_l(A, list("acd")) == pytest.approx(6 / 7, abs=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            rouge_l([], A)

    def test_lcs(self):
        assert lcs_length("ABCBDAB", "BDCABA") == 4

    @given(tokens, tokens)
    def test_symmetric(self, a, b):
        assert rouge_l(a, b) == pytest.approx(rouge_l(b, a), abs=1e-15)

    @given(tokens)
    def test_self_is_one(self, a):
        assert rouge_l(a, a) == 1.0


class TestDistinct:
    def test_all_distinct(self):
        assert distinct_n([A], 2) == 1.0

    def test_repeated(self):
        assert distinct_n([list("aaaa")], 2) == pytest.approx(1 / 3, abs=1e-15)

    def test_pooled(self):
        assert distinct_n([list("abc"), list("abd")], 2) == 0.75

    def test_too_short(self):
        with pytest.raises(UndefinedMetricError):
            distinct_n([["a"], ["b"]], 2)

    def test_bad_n(self):
        with pytest.raises(InvalidInputError):
            distinct_n([A], 0)

    def test_more_repetition_less_diverse(self):
        vals = [distinct_n([A * k], 2) for k in range(1, 6)]
        assert all(x > y for x, y in zip(vals, vals[1:]))


class TestSelfBleu:
    def test_identical(self):
        assert self_bleu([A, A, A]) == 1.0

    def test_disjoint_near_zero(self):
        assert self_bleu([list("abcd"), list("efgh"), list("ijkl")]) < 1e-8

    def test_needs_two(self):
        with pytest.raises(InvalidInputError):
            self_bleu([A])

    def test_frozen_bigram_value(self):
        # hand counts: BLEU(A|B,C)=1, BLEU(B|A,C)=sqrt(1/2), BLEU(C|A,B)=1/2
        assert self_bleu([A, B, C], max_n=2) == pytest.approx((1.5 + math.sqrt(0.5)) / 3, abs=1e-12)

    @pytest.mark.parametrize("max_n", [1, 2, 3, 4])
    def test_matches_oracle(self, max_n):
        cands = [A, B, C]
        expected = sum(oracle_bleu(c, [r for r in cands if r is not c], max_n) for c in cands) / 3
        assert abs(self_bleu(cands, max_n=max_n) - expected) < 1e-9

    def test_brevity_penalty(self):
        assert bleu(list("ab"), [list("abcd")], max_n=2) == pytest.approx(math.exp(-1), abs=1e-15)

    def test_short_identical_candidates(self):
        assert self_bleu([["a", "b"], ["a", "b"]]) == 1.0
        assert self_bleu([["a"], ["a"], ["a"]]) == 1.0

    def test_clipping(self):
        # "the the the" against one "the": unigram precision 1/3
        assert bleu(["the"] * 3, [["the", "cat", "sat"]], max_n=1) == pytest.approx(1 / 3)

    @settings(max_examples=50)
    @given(st.lists(tokens, min_size=2, max_size=4))
    def test_order_invariant_and_oracle(self, cands):
        val = self_bleu(cands, max_n=2)
        for perm in list(permutations(cands))[:6]:
            assert self_bleu(list(perm), max_n=2) == pytest.approx(val, abs=1e-12)
        expected = sum(oracle_bleu(c, cands[:i] + cands[i + 1:], 2) for i, c in enumerate(cands)) / len(cands)
        assert abs(val - expected) < 1e-9


@given(st.lists(tokens, min_size=2, max_size=4))
def test_relabeling_invariance(cands):
    relabel = {t: i for i, t in enumerate("gfedcba")}
    mapped = [[relabel[t] for t in c] for c in cands]
    assert self_bleu(cands) == pytest.approx(self_bleu(mapped), abs=1e-15)
    assert rouge_l(cands[0], cands[1]) == rouge_l(mapped[0], mapped[1])
    if any(len(c) >= 2 for c in cands):
        assert distinct_n(cands) == distinct_n(mapped)


class TestConfidence:
    def test_constant(self):
        assert confidence_summary([[0.5] * 7]) == {"mean": 0.5, "median": 0.5, "p90": 0.5}

    def test_deciles(self):
        s = confidence_summary([[i / 10 for i in range(1, 11)]])
        assert s["mean"] == pytest.approx(0.55)
        assert s["median"] == pytest.approx(0.55)
        assert s["p90"] == 1.0

    def test_single(self):
        assert confidence_summary([[0.91]]) == {"mean": 0.91, "median": 0.91, "p90": 0.91}

    def test_missing(self):
        with pytest.raises(MissingFieldError):
            confidence_summary([])

    def test_out_of_range(self):
        with pytest.raises(InvalidInputError):
            confidence_summary([[0.0]])


class TestGenerationFiles:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "g.jsonl"
        recs = [
            {"prompt_id": 1, "reference": "a b c d", "candidates": ["a c d", "a b c d"],
             "confidences": [[0.5, 0.5, 0.5], [1.0, 1.0, 1.0, 1.0]]},
            {"prompt_id": "x", "reference": [1, 2, 3], "candidates": [[1, 2, 3]]},
        ]
        path.write_text("\n".join(json.dumps(r) for r in recs) + "\n\n")
        gens = read_generations(path)
        assert gens[0].candidates[0] == ["a", "c", "d"]
        rows, agg = evaluate_generations(gens)
        assert rows[0]["rouge_l"] == pytest.approx((6 / 7 + 1) / 2)
        assert rows[1]["neg_self_bleu"] is None and rows[1]["conf_mean"] is None
        assert agg["rouge_l"] == pytest.approx(((6 / 7 + 1) / 2 + 1) / 2)
        assert agg["conf_mean"] == pytest.approx(5.5 / 7)

    def test_missing_field(self):
        with pytest.raises(MissingFieldError):
            parse_generation({"prompt_id": 1, "candidates": ["a"]}, 3)

    def test_confidence_length_mismatch(self):
        with pytest.raises(InvalidInputError, match="line 2"):
            parse_generation({"prompt_id": 1, "reference": "a", "candidates": ["a b"],
                              "confidences": [[0.5]]}, 2)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "g.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(InvalidInputError, match="line 1"):
            read_generations(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "g.jsonl"
        path.write_text("")
        with pytest.raises(InvalidInputError):
            read_generations(path)
