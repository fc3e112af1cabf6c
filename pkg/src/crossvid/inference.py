"""Inference strategies over a similarity matrix and the retrieval metrics.

Strategies: raw scores, querybank normalization with a dynamic inverted
softmax (probe-gated), and dual-softmax re-ranking (column-softmax prior).
Metrics: R@1/5/10, median rank, mean rank, RSum under a pessimistic tie
policy (ties count against the query; even-count medians take the lower
central value).
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError


@dataclass
class RetrievalMetrics:
    r1: float
    r5: float
    r10: float
    mr: float
    mean_r: float
    rsum: float
    n_query: int
    n_gallery: int

    def to_json_dict(self, strategy="none"):
        return {
            "strategy": strategy,
            "R1": self.r1,
            "R5": self.r5,
            "R10": self.r10,
            "MR": self.mr,
            "MeanR": self.mean_r,
            "RSum": self.rsum,
            "n_query": self.n_query,
            "n_gallery": self.n_gallery,
        }


def dsl_rerank(S, tau_r):
    """Multiply scores by a softmax prior over the query axis.

    The prior for column j distributes mass over queries, so every prior
    column sums to 1; a single-row matrix degenerates to the identity.
    """
    if tau_r <= 0:
        raise ParameterError(f"tau_r must be > 0, got {tau_r}")
    S = np.asarray(S, dtype=np.float64)
    z = tau_r * S
    z = z - z.max(axis=0, keepdims=True)
    e = np.exp(z)
    prior = e / e.sum(axis=0, keepdims=True)
    return S * prior


def dsl_prior(S, tau_r):
    """The column-stochastic prior on its own (used by contract tests)."""
    if tau_r <= 0:
        raise ParameterError(f"tau_r must be > 0, got {tau_r}")
    S = np.asarray(S, dtype=np.float64)
    z = tau_r * S
    z = z - z.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def qb_normalize(S, probe, beta):
    """Querybank normalization with a dynamic inverted softmax.

    The activation set holds each probe's top gallery index. A query row is
    re-scored as exp(beta*s_j) / sum_q exp(beta*P[q, j]) only when its top
    gallery item is in that set; all other rows pass through untouched. An
    empty querybank is the identity.
    """
    if beta <= 0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    S = np.asarray(S, dtype=np.float64)
    probe = np.asarray(probe, dtype=np.float64)
    if probe.size == 0:
        return S.copy()
    if probe.ndim != 2 or probe.shape[1] != S.shape[1]:
        raise ShapeError(
            f"querybank gallery width {probe.shape[1:]} does not match "
            f"matrix width {S.shape[1]}")
    hubs = set(np.argmax(probe, axis=1).tolist())
    # log-space denominator per gallery column, shared across queries
    zp = beta * probe
    mx = zp.max(axis=0)
    col_lse = mx + np.log(np.exp(zp - mx).sum(axis=0))
    out = S.copy()
    for i in range(S.shape[0]):
        if int(np.argmax(S[i])) in hubs:
            out[i] = np.exp(beta * S[i] - col_lse)
    return out


def rank_of(scores, true_index, tie_policy="pessimistic"):
    """1-based retrieval rank of the true gallery item within one query row."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if not 0 <= true_index < scores.shape[0]:
        raise ParameterError(
            f"true index {true_index} outside gallery of {scores.shape[0]}")
    if tie_policy != "pessimistic":
        raise ParameterError(f"unknown tie policy {tie_policy!r}")
    s_true = scores[true_index]
    higher = int((scores > s_true).sum())
    ties = int((scores == s_true).sum()) - 1
    return 1 + higher + ties


def compute_metrics(S, ground_truth=None):
    """All six metrics for a score matrix; ground truth defaults to identity."""
    S = np.asarray(S, dtype=np.float64)
    nq, ng = S.shape
    if ground_truth is None:
        ground_truth = np.arange(nq)
    ground_truth = np.asarray(ground_truth)
    if len(set(ground_truth.tolist())) != nq:
        raise ParameterError("ground-truth mapping must be injective")
    ranks = np.array([rank_of(S[i], int(ground_truth[i])) for i in range(nq)])
    r1 = 100.0 * int((ranks <= 1).sum()) / nq
    r5 = 100.0 * int((ranks <= 5).sum()) / nq
    r10 = 100.0 * int((ranks <= 10).sum()) / nq
    ordered = np.sort(ranks)
    mr = float(ordered[(nq - 1) // 2])
    mean_r = float(ranks.sum()) / nq
    return RetrievalMetrics(r1=r1, r5=r5, r10=r10, mr=mr, mean_r=mean_r,
                            rsum=r1 + r5 + r10, n_query=nq, n_gallery=ng)


def evaluate(S, strategy="none", tau_r=100.0, beta=20.0, querybank=None,
             ground_truth=None):
    """Apply an inference strategy, then score the resulting matrix."""
    if strategy == "none":
        scored = np.asarray(S, dtype=np.float64)
    elif strategy == "dsl":
        scored = dsl_rerank(S, tau_r)
    elif strategy == "qb":
        if querybank is None:
            raise ParameterError("strategy 'qb' requires a querybank")
        scored = qb_normalize(S, querybank, beta)
    else:
        raise ParameterError(f"unknown strategy {strategy!r}")
    return compute_metrics(scored, ground_truth)


def sample_querybank_rows(S_train, n_probe, seed):
    """Seeded sample of training-caption similarity rows to use as probes."""
    S_train = np.asarray(S_train, dtype=np.float64)
    if n_probe > S_train.shape[0]:
        raise ParameterError(
            f"n_probe {n_probe} > available rows {S_train.shape[0]}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 11]))
    idx = rng.choice(S_train.shape[0], size=n_probe, replace=False)
    return S_train[np.sort(idx)]


def metrics_json(metrics, strategy="none"):
    return json.dumps(metrics.to_json_dict(strategy), indent=2) + "\n"
