"""Independent reference computations used by the tests.

Nothing here imports rankjoint: each oracle is a direct transcription of the
textbook formula, using explicit loops and full eigendecompositions.
"""

import itertools
import math

import numpy as np


def ols(X, y):
    XtX_inv = np.linalg.inv(X.T @ X)
    beta = XtX_inv @ X.T @ y
    return beta, y - X @ beta, XtX_inv


def cr2_bruteforce(X, y, clusters):
    """Bell-McCaffrey CR2: A_g = (I - X_g (X'X)^-1 X_g')^(-1/2) by full eigh."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    beta, e, M = ols(X, y)
    meat = np.zeros((X.shape[1], X.shape[1]))
    for g in sorted(set(clusters)):
        rows = [i for i, c in enumerate(clusters) if c == g]
        Xg = X[rows]
        eg = e[rows]
        H = Xg @ M @ Xg.T
        vals, vecs = np.linalg.eigh(np.eye(len(rows)) - H)
        inv_sqrt = np.array([1 / math.sqrt(v) if v > 1e-12 else 0.0 for v in vals])
        A = vecs @ np.diag(inv_sqrt) @ vecs.T
        u = Xg.T @ A @ eg
        meat += np.outer(u, u)
    return M @ meat @ M


def cr0_bruteforce(X, y, clusters):
    X = np.asarray(X, float)
    beta, e, M = ols(X, np.asarray(y, float))
    meat = np.zeros((X.shape[1], X.shape[1]))
    for g in sorted(set(clusters)):
        rows = [i for i, c in enumerate(clusters) if c == g]
        u = X[rows].T @ e[rows]
        meat += np.outer(u, u)
    return M @ meat @ M


def hc2(X, y):
    """HC2: sum_i x_i x_i' e_i^2 / (1 - h_ii)."""
    X = np.asarray(X, float)
    beta, e, M = ols(X, np.asarray(y, float))
    meat = np.zeros((X.shape[1], X.shape[1]))
    for i in range(X.shape[0]):
        h = X[i] @ M @ X[i]
        meat += np.outer(X[i], X[i]) * e[i] ** 2 / (1 - h)
    return M @ meat @ M


def normal_two_sided_p(z):
    return math.erfc(abs(z) / math.sqrt(2))


def pooled_two_proportion(x1, n1, x2, n2):
    p1, p2 = x1 / n1, x2 / n2
    pool = (x1 + x2) / (n1 + n2)
    var = pool * (1 - pool) * (1 / n1 + 1 / n2)
    z = (p1 - p2) / math.sqrt(var)
    return z, normal_two_sided_p(z)


def expand_ranking(ranks):
    """Directed pairwise outcomes for one task: {(a, b): 1 if a beats b}."""
    K = len(ranks)
    return {(a, b): int(ranks[a] < ranks[b]) for a, b in itertools.permutations(range(K), 2)}
