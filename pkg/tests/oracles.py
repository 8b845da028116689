"""Brute-force reference implementations, deliberately naive and independent."""

import itertools
import math

import numpy as np


def floyd_warshall(n, edges):
    d = [[math.inf] * n for _ in range(n)]
    for i in range(n):
        d[i][i] = 0
    for a, b in edges:
        d[a][b] = d[b][a] = 1
    for k in range(n):
        for i in range(n):
            dik = d[i][k]
            if dik == math.inf:
                continue
            for j in range(n):
                if dik + d[k][j] < d[i][j]:
                    d[i][j] = dik + d[k][j]
    return d


def enclosing_set(n, edges, x, y, h, d=None):
    d = floyd_warshall(n, edges) if d is None else d
    return {i for i in range(n) if d[i][x] <= h or d[i][y] <= h}


def double_radius_label(dx, dy, is_center):
    if math.isinf(dx) or math.isinf(dy):
        return 0
    if is_center:
        return 1
    dx, dy = int(dx), int(dy)
    s = dx + dy
    return 1 + min(dx, dy) + (s // 2) * ((s // 2) + (s % 2) - 1)


def labels_brute(n, edges, x, y):
    kept = [(a, b) for a, b in edges if {a, b} != {x, y}]
    d = floyd_warshall(n, kept)
    return [double_radius_label(d[i][x], d[i][y], i in (x, y)) for i in range(n)]


def pairwise_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def random_graph(rng, n, p):
    return [(a, b) for a, b in itertools.combinations(range(n), 2) if rng.random() < p]


def spectral_radius(m, iters=5000):
    v = np.ones(len(m)) / math.sqrt(len(m))
    lam = 0.0
    for _ in range(iters):
        u = m @ v
        lam_new = np.linalg.norm(u)
        if lam_new == 0:
            return 0.0
        v = u / lam_new
        if abs(lam_new - lam) < 1e-13:
            break
        lam = lam_new
    return lam_new
