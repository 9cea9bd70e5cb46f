"""Fidelity and diversity metrics on pre-tokenized generations.

Tokens are opaque hashables (strings or integer ids). No stemming, lowercasing
or tokenization happens here.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError, MissingFieldError, UndefinedMetricError

SMOOTHING_EPS = 1e-9

TokenSeq = Sequence[Hashable]


def _nonempty(seq: TokenSeq, what: str) -> list:
    seq = list(seq)
    if not seq:
        raise InvalidInputError(f"{what} is empty")
    return seq


def lcs_length(a: TokenSeq, b: TokenSeq) -> int:
    # single-row dynamic programme over the shorter sequence
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(reference: TokenSeq, candidate: TokenSeq) -> float:
    """LCS-based F1 between a reference and a candidate."""
    ref = _nonempty(reference, "reference")
    cand = _nonempty(candidate, "candidate")
    lcs = lcs_length(ref, cand)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def ngrams(seq: TokenSeq, n: int) -> list:
    return [tuple(seq[i:i + n]) for i in range(len(seq) - n + 1)]


def distinct_n(candidates: Iterable[TokenSeq], n: int = 2) -> float:
    """Unique n-grams over total n-gram occurrences, pooled across candidates."""
    if n < 1:
        raise InvalidInputError("n must be a positive integer")
    pooled = [g for c in candidates for g in ngrams(list(c), n)]
    if not pooled:
        raise UndefinedMetricError(f"no candidate has at least {n} tokens")
    return len(set(pooled)) / len(pooled)


def bleu(candidate: TokenSeq, references: Sequence[TokenSeq], max_n: int = 4,
         eps: float = SMOOTHING_EPS) -> float:
    """Sentence BLEU with clipped counts, uniform weights and brevity penalty.

    An order with no clipped match contributes ``eps / total`` in place of a
    zero precision. Orders longer than the candidate have no n-grams at all and
    are dropped, with the weights spread over the remaining orders. The brevity
    penalty uses the reference length closest to the candidate length (shorter
    on ties).
    """
    cand = _nonempty(candidate, "candidate")
    refs = [_nonempty(r, "reference") for r in references]
    if not refs:
        raise InvalidInputError("need at least one reference")
    if max_n < 1:
        raise InvalidInputError("max_n must be a positive integer")
    orders = min(max_n, len(cand))
    log_p = 0.0
    for n in range(1, orders + 1):
        counts = Counter(ngrams(cand, n))
        max_ref = Counter()
        for r in refs:
            for g, c in Counter(ngrams(r, n)).items():
                max_ref[g] = max(max_ref[g], c)
        clipped = sum(min(c, max_ref[g]) for g, c in counts.items())
        total = sum(counts.values())
        p_n = clipped / total if clipped > 0 else eps / total
        log_p += math.log(p_n) / orders
    c = len(cand)
    r = min((abs(len(x) - c), len(x)) for x in refs)[1]
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(log_p)


def self_bleu(candidates: Sequence[TokenSeq], max_n: int = 4, eps: float = SMOOTHING_EPS) -> float:
    """Mean BLEU of each candidate against all the others (leave-one-out)."""
    cands = [_nonempty(c, "candidate") for c in candidates]
    if len(cands) < 2:
        raise InvalidInputError("self-BLEU needs at least two candidates")
    scores = [bleu(c, cands[:i] + cands[i + 1:], max_n, eps) for i, c in enumerate(cands)]
    return float(np.mean(scores))


@dataclass
class Generation:
    prompt_id: str
    reference: list
    candidates: list
    confidences: Optional[list] = None


def confidence_summary(confidences: Iterable[Iterable[float]]) -> dict:
    """Mean, median and p90 of pooled per-token confidences.

    The p90 takes the order statistic at ``ceil(0.9 * (n - 1))`` (zero-based),
    never interpolating.
    """
    pooled = np.array([c for seq in confidences for c in seq], dtype=np.float64)
    if pooled.size == 0:
        raise MissingFieldError("no per-token confidences available")
    if np.any((pooled <= 0) | (pooled > 1)):
        raise InvalidInputError("confidences must lie in (0, 1]")
    return {
        "mean": float(pooled.mean()),
        "median": float(np.median(pooled)),
        "p90": float(np.quantile(pooled, 0.9, method="higher")),
    }


def _tokens(value, where: str) -> list:
    if isinstance(value, str):
        return value.split()
    if isinstance(value, list) and all(isinstance(t, (str, int)) and not isinstance(t, bool) for t in value):
        return list(value)
    raise InvalidInputError(f"{where}: expected a token list or a whitespace-separated string")


def parse_generation(record: dict, lineno: int = 0) -> Generation:
    where = f"line {lineno}"
    for key in ("prompt_id", "reference", "candidates"):
        if key not in record:
            raise MissingFieldError(f"{where}: missing field {key!r}")
    unknown = set(record) - {"prompt_id", "reference", "candidates", "confidences"}
    if unknown:
        raise InvalidInputError(f"{where}: unknown fields {sorted(unknown)}")
    cands = record["candidates"]
    if not isinstance(cands, list) or not cands:
        raise InvalidInputError(f"{where}: candidates must be a non-empty list")
    gen = Generation(
        prompt_id=str(record["prompt_id"]),
        reference=_tokens(record["reference"], where),
        candidates=[_tokens(c, where) for c in cands],
    )
    conf = record.get("confidences")
    if conf is not None:
        if not isinstance(conf, list) or len(conf) != len(gen.candidates):
            raise InvalidInputError(f"{where}: need one confidence list per candidate")
        for c, seq in zip(conf, gen.candidates):
            if not isinstance(c, list) or len(c) != len(seq):
                raise InvalidInputError(f"{where}: confidence list length does not match its candidate")
        gen.confidences = [[float(x) for x in c] for c in conf]
    return gen


def read_generations(path) -> list:
    """Load a JSON-lines generation file; blank lines are skipped."""
    gens = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"line {lineno}: {exc.msg}") from None
            if not isinstance(record, dict):
                raise InvalidInputError(f"line {lineno}: expected a JSON object")
            gens.append(parse_generation(record, lineno))
    if not gens:
        raise InvalidInputError("no records in input")
    return gens


PROMPT_FIELDS = ("prompt_id", "rouge_l", "distinct_2", "neg_self_bleu",
                 "conf_mean", "conf_median", "conf_p90")


def evaluate_generation(gen: Generation) -> dict:
    row = {"prompt_id": gen.prompt_id}
    row["rouge_l"] = float(np.mean([rouge_l(gen.reference, c) for c in gen.candidates]))
    try:
        row["distinct_2"] = distinct_n(gen.candidates, 2)
    except UndefinedMetricError:
        row["distinct_2"] = None
    row["neg_self_bleu"] = -self_bleu(gen.candidates) if len(gen.candidates) >= 2 else None
    if gen.confidences:
        s = confidence_summary(gen.confidences)
        row.update(conf_mean=s["mean"], conf_median=s["median"], conf_p90=s["p90"])
    else:
        row.update(conf_mean=None, conf_median=None, conf_p90=None)
    return row


def evaluate_generations(gens: Sequence[Generation]) -> tuple[list, dict]:
    """Per-prompt rows plus an aggregate row.

    The aggregate averages each metric over the prompts where it is defined,
    except the confidence statistics, which pool every token.
    """
    rows = [evaluate_generation(g) for g in gens]
    agg = {"prompt_id": "ALL"}
    for key in ("rouge_l", "distinct_2", "neg_self_bleu"):
        vals = [r[key] for r in rows if r[key] is not None]
        agg[key] = float(np.mean(vals)) if vals else None
    pooled = [c for g in gens if g.confidences for c in g.confidences]
    if pooled:
        s = confidence_summary(pooled)
        agg.update(conf_mean=s["mean"], conf_median=s["median"], conf_p90=s["p90"])
    else:
        agg.update(conf_mean=None, conf_median=None, conf_p90=None)
    return rows, agg
