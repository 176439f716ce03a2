"""Weighted isotonic regression for the premium-loading link.

Observed commercial premiums are regressed on model pure premiums under a
monotonicity constraint only: the loading function is assumed nondecreasing
but otherwise free. The fit is the classical pool-adjacent-violators
solution, exposed as a right-continuous step function with flat
extrapolation beyond the fitted range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["IsotonicFit", "sort_permutation", "pava_fit", "loading_apply"]


def sort_permutation(p, tiebreak) -> np.ndarray:
    """Indices sorting ``p`` ascending, ties broken by ``tiebreak`` then position.

    Both orderings are stable, so repeated calls on equal data give the same
    permutation. Used to keep pure premiums and observed premiums aligned in
    one canonical order before fitting.
    """
    p = np.asarray(p, dtype=float)
    tiebreak = np.asarray(tiebreak, dtype=float)
    if p.shape != tiebreak.shape or p.ndim != 1:
        raise ValueError("p and tiebreak must be 1-d arrays of equal length")
    return np.lexsort((tiebreak, p))


@dataclass(frozen=True)
class IsotonicFit:
    """Result of a weighted isotonic regression.

    ``x`` holds the distinct predictor values in ascending order, ``values``
    the fitted (nondecreasing) step levels at those points, and ``fitted``
    the fit evaluated at every input point in original input order.
    """

    x: np.ndarray
    values: np.ndarray
    fitted: np.ndarray

    def __post_init__(self):
        for name in ("x", "values", "fitted"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def n_blocks(self) -> int:
        """Number of constant pieces in the step function."""
        if self.values.size == 0:
            return 0
        return 1 + int(np.sum(np.diff(self.values) > 0))

    def predict(self, p) -> np.ndarray:
        """Evaluate the step function at new points.

        Right-continuous: at a knot the fitted level at that knot applies.
        Points outside the fitted range take the nearest boundary level.
        """
        p = np.atleast_1d(np.asarray(p, dtype=float))
        idx = np.searchsorted(self.x, p, side="right") - 1
        return self.values[np.clip(idx, 0, self.x.size - 1)]


def pava_fit(x, y, weights=None) -> IsotonicFit:
    """Weighted least-squares isotonic regression of ``y`` on ``x``.

    Ties in ``x`` are pooled into a single point (weighted mean response,
    summed weight) before fitting, so the result is a function of ``x``.
    Weights default to uniform; the fit is invariant to their overall scale.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if x.size == 0:
        raise ValueError("cannot fit an empty regression")
    if weights is None:
        w = np.ones_like(x)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != x.shape:
            raise ValueError("weights must match x in length")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and strictly positive")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("x and y must be finite")

    order = np.argsort(x, kind="stable")
    xs, ys, ws = x[order], y[order], w[order]

    # Pool exact ties on x: one point per distinct x with weighted mean y.
    if xs.size > 1 and np.any(xs[1:] == xs[:-1]):
        starts = np.flatnonzero(np.concatenate(([True], xs[1:] != xs[:-1])))
        multiplicity = np.diff(np.append(starts, xs.size))
        wsum = np.add.reduceat(ws, starts)
        ymean = np.add.reduceat(ws * ys, starts) / wsum
        ux = xs[starts]
    else:
        multiplicity = None
        wsum, ymean, ux = ws, ys, xs

    # Pool adjacent violators: merge backwards while a block exceeds its
    # successor. Plain-float stacks keep the loop off numpy scalars.
    m_in = ymean.tolist()
    w_in = wsum.tolist()
    means: list[float] = []
    wts: list[float] = []
    counts: list[int] = []
    for i in range(len(m_in)):
        cur_m = m_in[i]
        cur_w = w_in[i]
        cur_c = 1
        while means and means[-1] > cur_m:
            pm = means.pop()
            pw = wts.pop()
            cur_c += counts.pop()
            tot = pw + cur_w
            cur_m = (pm * pw + cur_m * cur_w) / tot
            cur_w = tot
        means.append(cur_m)
        wts.append(cur_w)
        counts.append(cur_c)

    values = np.repeat(means, counts)

    fitted_sorted = values if multiplicity is None else np.repeat(values, multiplicity)
    fitted = np.empty_like(fitted_sorted, shape=x.shape)
    fitted[order] = fitted_sorted
    return IsotonicFit(x=ux, values=values, fitted=fitted)


def loading_apply(fit: IsotonicFit, p) -> np.ndarray:
    """Apply a fitted loading link to new pure premiums."""
    return fit.predict(p)
