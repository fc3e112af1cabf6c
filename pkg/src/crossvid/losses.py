"""The three training losses and their weighted total.

Cross-modal InfoNCE over the similarity matrix, a within-sample concept
contrastive kernel (cosine positives on matching concept indices, negatives
on mismatched indices, symmetric over both directions), and the alignment
loss applying that kernel between each modality and its tag stream.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ParameterError, ShapeError


@dataclass
class LossWeights:
    alpha_c: float = 1.0
    alpha_a: float = 1.0


@dataclass
class LossReport:
    l_s: float
    l_c: float
    l_a: float
    total: float


def _scalar(x):
    return float(ad.value_of(x)[0, 0])


def infonce_cross_modal(S, tau_s):
    """Symmetric InfoNCE with diagonal positives; mean over both directions."""
    if tau_s <= 0:
        raise ParameterError(f"tau_s must be > 0, got {tau_s}")
    shape = ad.value_of(S).shape
    if shape[0] != shape[1]:
        raise ShapeError(f"cross-modal loss needs a square matrix, got {shape}")
    row_ls = ad.log_softmax_rows(ad.scale(S, 1.0 / tau_s))
    col_ls = ad.log_softmax_rows(ad.scale(ad.transpose(S), 1.0 / tau_s))
    row_term = ad.mean_all(ad.diag_part(row_ls))
    col_term = ad.mean_all(ad.diag_part(col_ls))
    return ad.scale(ad.add(row_term, col_term), -0.5)


def concept_contrastive(a_set, b_set, tau_c):
    """Within-sample contrastive loss for one (K, d/K) concept-set pair."""
    if tau_c <= 0:
        raise ParameterError(f"tau_c must be > 0, got {tau_c}")
    a_shape, b_shape = ad.value_of(a_set).shape, ad.value_of(b_set).shape
    if a_shape != b_shape:
        raise ShapeError(f"concept sets disagree: {a_shape} vs {b_shape}")
    an = ad.l2_normalize_rows(a_set)
    bn = ad.l2_normalize_rows(b_set)
    cos = ad.matmul(an, ad.transpose(bn))           # (K, K), cos(a_k, b_l)
    fwd = ad.mean_all(ad.diag_part(ad.log_softmax_rows(ad.scale(cos, 1.0 / tau_c))))
    rev = ad.mean_all(ad.diag_part(
        ad.log_softmax_rows(ad.scale(ad.transpose(cos), 1.0 / tau_c))))
    return ad.scale(ad.add(fwd, rev), -0.5)


def batch_concept_contrastive(A_list, B_list, tau_c):
    """Batch mean of concept_contrastive over per-sample concept sets.

    A_list/B_list hold K matrices of shape (B, d/K); sample i's set is row i
    across the K matrices. Vectorized through stacked concept-gram blocks so
    the tape size is independent of B and K.
    """
    if tau_c <= 0:
        raise ParameterError(f"tau_c must be > 0, got {tau_c}")
    k = len(A_list)
    b = ad.value_of(A_list[0]).shape[0]
    an = ad.l2_normalize_rows(ad.concat_rows(A_list))   # (K*B, d/K)
    bn = ad.l2_normalize_rows(ad.concat_rows(B_list))
    mask = np.repeat(np.eye(k), b, axis=0)              # row k*b+i: one-hot at k

    def direction(xs, ys):
        logits = ad.concept_gram(xs, ys, k, b)          # (K*B, K)
        ls = ad.log_softmax_rows(ad.scale(logits, 1.0 / tau_c))
        return ad.scale(ad.sum_all(ad.mul(ls, mask)), 1.0 / (k * b))

    return ad.scale(ad.add(direction(an, bn), direction(bn, an)), -0.5)


def loss_C(E_v, E_t, tau_c):
    """Aligns video concepts with text concepts, averaged over the batch."""
    return batch_concept_contrastive(E_v, E_t, tau_c)


def loss_A(E_v, E_t, E_av, E_at, tau_c, use_visual_tags=True, use_textual_tags=True):
    """Aligns each modality's concepts with its tag-derived concepts.

    Disabled tag streams drop their half; with both disabled this is the
    constant zero.
    """
    terms = []
    if use_visual_tags:
        terms.append(batch_concept_contrastive(E_v, E_av, tau_c))
    if use_textual_tags:
        terms.append(batch_concept_contrastive(E_t, E_at, tau_c))
    if not terms:
        return np.zeros((1, 1))
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    return total


def total_loss(S, E_v, E_t, E_av, E_at, weights, tau_s, tau_c,
               use_visual_tags=True, use_textual_tags=True):
    """Assemble L_S + alpha_C * L_C + alpha_A * L_A.

    Returns (LossReport, total node) so the caller can run backward.
    """
    l_s = infonce_cross_modal(S, tau_s)
    l_c = loss_C(E_v, E_t, tau_c)
    l_a = loss_A(E_v, E_t, E_av, E_at, tau_c, use_visual_tags, use_textual_tags)
    total = ad.add(ad.add(l_s, ad.scale(l_c, weights.alpha_c)),
                   ad.scale(l_a, weights.alpha_a))
    report = LossReport(
        l_s=_scalar(l_s), l_c=_scalar(l_c), l_a=_scalar(l_a), total=_scalar(total),
    )
    return report, total
