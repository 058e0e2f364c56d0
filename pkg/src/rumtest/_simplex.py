"""Dense tableau simplex for tiny LPs of the form max c.x, A x <= b, x >= 0, b >= 0.

The origin is always feasible for the problems built by the geometry module, so
the slack basis is a valid starting point and no phase-one pass is needed.
Bland's rule guards against cycling on degenerate vertices.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


class Unbounded(ArithmeticError):
    pass


def maximize(c, A, b, max_pivots: int = 10_000):
    """Return ``(value, x)`` maximizing ``c @ x`` over ``{x >= 0 : A @ x <= b}``.

    ``b`` must be componentwise nonnegative.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if np.any(b < 0):
        raise ValueError("right-hand side must be nonnegative (origin feasible)")

    # rows 0..m-1: constraints, row m: reduced costs (-c)
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = -c
    basis = list(range(n, n + m))

    for _ in range(max_pivots):
        red = tab[m, :-1]
        entering = -1
        for k in range(n + m):
            if red[k] < -_EPS:
                entering = k
                break
        if entering < 0:
            break
        col = tab[:m, entering]
        best_ratio = np.inf
        leaving = -1
        for i in range(m):
            if col[i] > _EPS:
                ratio = tab[i, -1] / col[i]
                if ratio < best_ratio - _EPS or (
                    abs(ratio - best_ratio) <= _EPS and basis[i] < basis[leaving]
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            raise Unbounded("objective is unbounded")
        tab[leaving] /= tab[leaving, entering]
        for i in range(m + 1):
            if i != leaving and tab[i, entering] != 0.0:
                tab[i] -= tab[i, entering] * tab[leaving]
        basis[leaving] = entering
    else:
        raise RuntimeError("simplex pivot limit reached")

    x = np.zeros(n + m)
    for i, k in enumerate(basis):
        x[k] = tab[i, -1]
    return float(tab[m, -1]), x[:n]
