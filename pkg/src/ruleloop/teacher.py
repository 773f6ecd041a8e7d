"""Teachers: aggregate rule votes into soft labels over covered instances.

Both teachers only emit distributions for instances with at least one vote;
everything else stays uncovered. Conflicts between rules are resolved here,
not in the vote matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rules import LabelMatrix

DS_MAX_ITER = 100
DS_TOL = 1e-6
DS_SMOOTHING = 0.01


@dataclass
class TeacherOutput:
    soft_labels: dict[str, np.ndarray]
    covered: set[str]
    model_params: dict = field(default_factory=dict)

    def argmax_label(self, instance_id: str) -> int:
        """1-based argmax class; ties break toward the smaller class index."""
        return int(np.argmax(self.soft_labels[instance_id])) + 1


def majority_vote(matrix: LabelMatrix, num_classes: int) -> TeacherOutput:
    """q_i[k] = (votes for k on i) / (total votes on i)."""
    soft: dict[str, np.ndarray] = {}
    for iid in matrix.covered_instances():
        counts = np.zeros(num_classes)
        for _, label in matrix.votes_on(iid):
            counts[label - 1] += 1
        soft[iid] = counts / counts.sum()
    return TeacherOutput(soft_labels=soft, covered=set(soft), model_params={})


def dawid_skene(
    matrix: LabelMatrix,
    num_classes: int,
    max_iter: int = DS_MAX_ITER,
    tol: float = DS_TOL,
    smoothing: float = DS_SMOOTHING,
) -> TeacherOutput:
    """EM over per-rule confusion matrices and a learned class prior.

    Posteriors start at the majority-vote distributions. Each round
    re-estimates the prior and the K x K confusion matrix of every rule
    (additive smoothing on rows), then recomputes instance posteriors;
    stops when the max absolute posterior change drops below tol.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")

    covered = matrix.covered_instances()
    if not covered:
        return TeacherOutput(soft_labels={}, covered=set(), model_params={})

    K = num_classes
    n = len(covered)
    instance_pos = {iid: i for i, iid in enumerate(covered)}
    rule_ids = list(matrix.rule_order)
    rule_pos = {rid: j for j, rid in enumerate(rule_ids)}
    m = len(rule_ids)

    # Flat vote triplets (instance, rule, label-1), deterministic order.
    vote_i = []
    vote_j = []
    vote_l = []
    for iid in covered:
        for rid, label in matrix.votes_on(iid):
            vote_i.append(instance_pos[iid])
            vote_j.append(rule_pos[rid])
            vote_l.append(label - 1)
    vote_i = np.array(vote_i)
    vote_j = np.array(vote_j)
    vote_l = np.array(vote_l)

    mv = majority_vote(matrix, K)
    posteriors = np.stack([mv.soft_labels[iid] for iid in covered])

    prior = np.zeros(K)
    confusion = np.zeros((m, K, K))
    for _ in range(max_iter):
        # M-step: class prior and per-rule confusion matrices.
        prior = posteriors.mean(axis=0)
        counts = np.zeros((m, K, K))
        np.add.at(counts, (vote_j, slice(None), vote_l), posteriors[vote_i])
        counts += smoothing
        denom = counts.sum(axis=2, keepdims=True)
        confusion = np.divide(
            counts, denom, out=np.full_like(counts, 1.0 / K), where=denom > 0
        )

        # E-step: posterior over classes per instance.
        log_conf = np.log(np.clip(confusion, 1e-300, None))
        log_post = np.tile(np.log(np.clip(prior, 1e-300, None)), (n, 1))
        np.add.at(log_post, vote_i, log_conf[vote_j, :, vote_l])
        log_post -= log_post.max(axis=1, keepdims=True)
        new_posteriors = np.exp(log_post)
        new_posteriors /= new_posteriors.sum(axis=1, keepdims=True)

        delta = np.abs(new_posteriors - posteriors).max()
        posteriors = new_posteriors
        if delta < tol:
            break

    soft = {iid: posteriors[i].copy() for iid, i in instance_pos.items()}
    params = {
        "prior": prior.copy(),
        "confusion": {rid: confusion[j].copy() for rid, j in rule_pos.items()},
    }
    return TeacherOutput(soft_labels=soft, covered=set(covered), model_params=params)


TEACHERS = {
    "majority_vote": majority_vote,
    "dawid_skene": dawid_skene,
}


def train_teacher(name: str, matrix: LabelMatrix, num_classes: int) -> TeacherOutput:
    try:
        fn = TEACHERS[name]
    except KeyError:
        raise ValueError(f"unknown teacher {name!r}; choose from {sorted(TEACHERS)}") from None
    return fn(matrix, num_classes)
