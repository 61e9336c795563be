"""Straight-line reference implementations used to check the vectorized code."""

import math


def cos_dist(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return min(2.0, max(0.0, 1.0 - dot / (na * nb)))


def distance_matrix(vectors):
    n = len(vectors)
    return [[0.0 if i == j else cos_dist(vectors[i], vectors[j]) for j in range(n)] for i in range(n)]


def rd_of(vectors, eps=1e-12):
    """Reachability density and outlier factor over all peers."""
    unit = []
    for v in vectors:
        norm = math.sqrt(sum(x * x for x in v))
        unit.append([x / norm for x in v])
    D = distance_matrix(unit)
    n = len(vectors)
    rd = []
    for p in range(n):
        total = 0.0
        for o in range(n):
            if o != p:
                total += D[p][o]
        rd.append(1.0 / max(eps, total / (n - 1)))
    of = []
    for p in range(n):
        acc = 0.0
        for o in range(n):
            if o != p:
                acc += rd[o] / rd[p]
        of.append(acc / (n - 1))
    return rd, of


def krum_scores(vectors, f):
    n = len(vectors)
    scores = []
    for i in range(n):
        d2 = sorted(sum((a - b) ** 2 for a, b in zip(vectors[i], vectors[j])) for j in range(n) if j != i)
        scores.append(sum(d2[: n - f - 2]))
    return scores


def largest_gap_exclusions(of):
    order = sorted(range(len(of)), key=lambda i: (of[i], i))
    gaps = [of[order[k + 1]] - of[order[k]] for k in range(len(of) - 1)]
    best = max(gaps)
    if best <= 0:
        return set()
    cut = max(k for k, g in enumerate(gaps) if math.isclose(g, best, rel_tol=1e-9, abs_tol=0.0))
    return set(order[cut + 1:])
