"""Instance selection: Ward-linkage agglomerative clustering with
cluster-adaptive entropy-driven sampling, plus uncertainty and random
baselines.

Merge heights are Ward cost increments (the growth in total within-cluster
sum of squares), so the height of merging two singletons x, y is
||x - y||^2 / 2. Tie rule, documented and shared with the test oracle:
clusters are identified by their smallest leaf index, and among pairs at
the minimal distance the lexicographically smallest (i, j) pair merges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FRONTIER_GRANULARITY = 64
PURITY_THRESHOLD_FACTOR = 0.1  # threshold = 0.1 * log K


@dataclass
class ClusterTree:
    """Binary merge tree over unlabeled instances.

    Leaves are 0..n-1 in input order; internal nodes n..2n-2 in merge order.
    """

    ids: list[str]
    left: list[int]  # children of internal nodes, indexed by node - n
    right: list[int]
    heights: list[float]  # merge cost per internal node
    sizes: list[int]

    @property
    def num_leaves(self) -> int:
        return len(self.ids)

    @property
    def num_nodes(self) -> int:
        return 2 * self.num_leaves - 1

    @property
    def root(self) -> int:
        return self.num_nodes - 1

    def children(self, node: int) -> tuple[int, int]:
        internal = node - self.num_leaves
        return self.left[internal], self.right[internal]

    def height(self, node: int) -> float:
        if node < self.num_leaves:
            return 0.0
        return self.heights[node - self.num_leaves]

    def size(self, node: int) -> int:
        if node < self.num_leaves:
            return 1
        return self.sizes[node - self.num_leaves]

    def members(self, node: int) -> list[int]:
        """Leaf indices under a node, ascending."""
        stack = [node]
        leaves = []
        while stack:
            cur = stack.pop()
            if cur < self.num_leaves:
                leaves.append(cur)
            else:
                stack.extend(self.children(cur))
        return sorted(leaves)

    def merge_sequence(self) -> list[tuple[frozenset[int], frozenset[int], float]]:
        """(left members, right members, height) per merge, in merge order."""
        out = []
        for internal in range(len(self.heights)):
            node = self.num_leaves + internal
            l, r = self.children(node)
            out.append((frozenset(self.members(l)), frozenset(self.members(r)), self.heights[internal]))
        return out

    def cut(self, num_clusters: int) -> list[int]:
        """Node ids of the clustering with exactly num_clusters clusters."""
        n = self.num_leaves
        if not 1 <= num_clusters <= n:
            raise ValueError(f"cannot cut {n}-leaf tree into {num_clusters} clusters")
        alive = set(range(n))
        for internal in range(n - num_clusters):
            node = n + internal
            l, r = self.children(node)
            alive.discard(l)
            alive.discard(r)
            alive.add(node)
        return sorted(alive)

    def parent_array(self) -> list[int]:
        parents = [-1] * self.num_nodes
        for internal in range(len(self.heights)):
            node = self.num_leaves + internal
            l, r = self.children(node)
            parents[l] = node
            parents[r] = node
        return parents


def build_hierarchy(ids: list[str], embeddings: np.ndarray) -> ClusterTree:
    """Agglomerative Ward clustering via the Lance-Williams update."""
    X = np.asarray(embeddings, dtype=float)
    n = len(ids)
    if n < 2:
        raise ValueError("need at least 2 instances to cluster")
    if X.shape[0] != n:
        raise ValueError("ids and embeddings length mismatch")

    # Pairwise Ward increments between singletons: ||x - y||^2 / 2.
    sq = (X * X).sum(axis=1)
    dist = (sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)) / 2.0
    np.maximum(dist, 0.0, out=dist)
    np.fill_diagonal(dist, np.inf)

    sizes = np.ones(n)
    node_of_slot = list(range(n))  # slot k holds the cluster whose smallest leaf is k
    left: list[int] = []
    right: list[int] = []
    heights: list[float] = []
    out_sizes: list[int] = []

    for step in range(n - 1):
        flat = int(np.argmin(dist))
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        h = float(dist[i, j])

        new_node = n + step
        left.append(node_of_slot[i])
        right.append(node_of_slot[j])
        heights.append(h)
        ni, nj = sizes[i], sizes[j]
        out_sizes.append(int(ni + nj))

        # Lance-Williams update for Ward, applied to row/col i.
        nk = sizes
        updated = ((ni + nk) * dist[i] + (nj + nk) * dist[j] - nk * h) / (ni + nj + nk)
        dist[i, :] = updated
        dist[:, i] = updated
        dist[i, i] = np.inf
        dist[j, :] = np.inf
        dist[:, j] = np.inf

        sizes[i] = ni + nj
        node_of_slot[i] = new_node

    return ClusterTree(ids=list(ids), left=left, right=right, heights=heights, sizes=out_sizes)


def dump_tree(tree: ClusterTree, path: str | Path) -> None:
    """Parent-array text dump: node, parent, size, height per line."""
    parents = tree.parent_array()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node\tparent\tsize\theight\tinstance\n")
        for node in range(tree.num_nodes):
            instance = tree.ids[node] if node < tree.num_leaves else ""
            fh.write(
                f"{node}\t{parents[node]}\t{tree.size(node)}\t{tree.height(node):.12g}\t{instance}\n"
            )


def entropy(distribution: np.ndarray) -> float:
    p = np.asarray(distribution, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


@dataclass
class SamplerState:
    """Mutable selection state over a fixed tree: the frontier clusters,
    their entropy statistics, and the ids already queried."""

    cluster_members: list[list[str]]  # instance ids per frontier cluster
    queried: set[str] = field(default_factory=set)
    mean_entropy: list[float] = field(default_factory=list)
    exhausted: list[bool] = field(default_factory=list)

    @staticmethod
    def for_tree(tree: ClusterTree, granularity: int = FRONTIER_GRANULARITY) -> "SamplerState":
        m = min(granularity, tree.num_leaves)
        nodes = tree.cut(m)
        members = [[tree.ids[leaf] for leaf in tree.members(node)] for node in nodes]
        return SamplerState(
            cluster_members=members,
            mean_entropy=[0.0] * len(members),
            exhausted=[False] * len(members),
        )

    def mark_queried(self, instance_id: str) -> None:
        self.queried.add(instance_id)


def select_batch(
    tree: ClusterTree,
    state: SamplerState,
    student_soft,
    batch: int,
    rng: np.random.Generator,
) -> list[str]:
    """Pick `batch` distinct unqueried instances, favoring impure clusters.

    Each pick takes the non-exhausted frontier cluster with the highest mean
    predictive entropy over its unqueried members (clusters below the purity
    threshold are skipped while any cluster is still above it; entropy ties
    are broken by a seeded uniform choice) and samples one member uniformly.
    Returns fewer than `batch` ids only when everything has been queried.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    ent = {iid: entropy(row) for iid, row in zip(student_soft.ids, student_soft.targets)}
    num_classes = student_soft.targets.shape[1]
    threshold = PURITY_THRESHOLD_FACTOR * math.log(num_classes)

    picked: list[str] = []
    for _ in range(batch):
        candidates = []
        for c, members in enumerate(state.cluster_members):
            unqueried = [iid for iid in members if iid not in state.queried]
            state.exhausted[c] = not unqueried
            if not unqueried:
                continue
            state.mean_entropy[c] = sum(ent[iid] for iid in unqueried) / len(unqueried)
            candidates.append((c, unqueried, state.mean_entropy[c]))
        if not candidates:
            break
        above = [item for item in candidates if item[2] >= threshold]
        pool = above if above else candidates
        best = max(item[2] for item in pool)
        tied = [item for item in pool if item[2] == best]
        c, unqueried, _ = tied[rng.integers(len(tied))]
        choice = sorted(unqueried)[rng.integers(len(unqueried))]
        state.mark_queried(choice)
        picked.append(choice)
    return picked


def uncertainty_select(student_soft, k: int) -> list[str]:
    """Top-k ids by predictive entropy, ties broken by id."""
    scored = sorted(
        zip(student_soft.ids, student_soft.targets),
        key=lambda pair: (-entropy(pair[1]), pair[0]),
    )
    return [iid for iid, _ in scored[: max(k, 0)]]


def random_select(unlabeled_ids: list[str], k: int, rng: np.random.Generator) -> list[str]:
    """Seeded uniform sample without replacement (everything if k is large)."""
    ids = list(unlabeled_ids)
    k = min(k, len(ids))
    chosen = rng.choice(len(ids), size=k, replace=False)
    return [ids[i] for i in chosen]
