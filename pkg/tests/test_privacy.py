"""Exhaustive coding-layer privacy checks over a tiny field.

With q=5, M=2, K=3, r=1, p=1 every (gradient pair, mask pair) combination
can be enumerated, so the share-uniformity and aggregate-secrecy claims are
verified exactly, not sampled.
"""

import itertools
from collections import Counter

from secagg.coding import CodingConfig, encode_shares

CFG = CodingConfig.default(M=2, K=3, r=1, p=1, q=5)
Q = CFG.q


def share_pair(j, g1, g2, n1, n2):
    c1 = encode_shares([g1], [n1], CFG)[j][0]
    c2 = encode_shares([g2], [n2], CFG)[j][0]
    return c1, c2


def test_share_pairs_uniform_for_every_gradient_assignment():
    # For each server and each fixed (g1, g2), the map (n1, n2) -> (c1, c2)
    # must hit every pair in F_5 x F_5 exactly once.
    for j in range(CFG.K):
        for g1, g2 in itertools.product(range(Q), repeat=2):
            counts = Counter(
                share_pair(j, g1, g2, n1, n2)
                for n1, n2 in itertools.product(range(Q), repeat=2)
            )
            assert len(counts) == Q * Q
            assert set(counts.values()) == {1}


def test_share_pair_distribution_identical_across_gradients():
    for j in range(CFG.K):
        reference = None
        for g1, g2 in itertools.product(range(Q), repeat=2):
            dist = Counter(
                share_pair(j, g1, g2, n1, n2)
                for n1, n2 in itertools.product(range(Q), repeat=2)
            )
            if reference is None:
                reference = dist
            assert dist == reference


def test_aggregate_distribution_independent_of_sum():
    # The server's aggregate F(alpha_j) = share1 + share2 must be uniform
    # with the same distribution whatever the true aggregate g_D is.
    for j in range(CFG.K):
        per_gd = {}
        for g1, g2 in itertools.product(range(Q), repeat=2):
            gd = (g1 + g2) % Q
            dist = per_gd.setdefault(gd, Counter())
            for n1, n2 in itertools.product(range(Q), repeat=2):
                c1, c2 = share_pair(j, g1, g2, n1, n2)
                dist[(c1 + c2) % Q] += 1
        reference = None
        for gd, dist in sorted(per_gd.items()):
            total = sum(dist.values())
            assert len(dist) == Q
            assert set(dist.values()) == {total // Q}
            normalized = {v: c / total for v, c in dist.items()}
            if reference is None:
                reference = normalized
            assert normalized == reference


def test_single_share_marginal_uniform():
    for j in range(CFG.K):
        for g in range(Q):
            counts = Counter(encode_shares([g], [n], CFG)[j][0] for n in range(Q))
            assert set(counts.values()) == {1} and len(counts) == Q
