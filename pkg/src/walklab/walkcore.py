"""Killed-walk distribution engine.

Evolves the k-step distribution of a right random walk restricted to an
indexed word ball: mass stepping outside the ball is dropped.  Restriction
makes every computed probability a lower bound of the free-walk value, and
it is exact as long as the relevant paths cannot leave the ball (for return
probabilities up to k steps, a ball of radius k/2 times the maximal step
length suffices).

All accumulation is plain numpy over per-support gather columns in a fixed
order, so results are bit-reproducible and thread-count independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .groups import BallIndex, GroupModel


class WalkOperator:
    """One right-convolution step v -> v * mu on a killed ball.

    ``support`` is a sequence of (value, weight) pairs in a fixed order.
    Column s of the operator gathers v at index(z * s^-1), so that
    (step v)(z) = sum_s mu(s) v(z s^-1) over paths staying inside the ball.
    """

    def __init__(self, ball: BallIndex, support):
        self.ball = ball
        self.support = tuple(support)
        model = ball.model
        n = ball.size
        gen_pos = {gv: j for j, gv in enumerate(model._generator_values)}
        identity = model.identity_value()
        cols = []
        weights = []
        for s_value, weight in self.support:
            s_inv = model.inv_value(s_value)
            if s_value == identity:
                col = np.arange(n, dtype=np.int64)
            elif s_inv in gen_pos and ball.transitions is not None:
                col = ball.transitions[:, gen_pos[s_inv]].astype(np.int64)
            else:
                index_get = ball.index.get
                mulv = model.mul_values
                col = np.fromiter(
                    (index_get(mulv(v, s_inv), -1) for v in ball.values),
                    dtype=np.int64,
                    count=n,
                )
            cols.append(np.where(col >= 0, col, n))  # n = sentinel slot holding 0
            weights.append(float(weight))
        self._cols = cols
        self._weights = weights
        self._ext = np.zeros(n + 1)

    @property
    def size(self) -> int:
        return self.ball.size

    def step(self, v: np.ndarray) -> np.ndarray:
        ext = self._ext
        ext[:-1] = v
        out = self._weights[0] * ext[self._cols[0]]
        for w, col in zip(self._weights[1:], self._cols[1:]):
            out += w * ext[col]
        return out


@dataclass
class GreenAccumulation:
    """Cumulative output of a truncated Green-function sweep."""

    trunc: int
    log_rho: float
    partial: np.ndarray  # S_K(z) = sum_{k<=K} v_k(z), per ball index
    log_ratio: np.ndarray  # max_k [ln v_k(z) - k ln rho]; -inf if never visited
    returns: np.ndarray  # v_k(e) for k = 0..K


def accumulate_green(op: WalkOperator, trunc: int, rho: float) -> GreenAccumulation:
    """Run the killed DP for ``trunc`` steps, tracking partial sums and the
    per-element ratio statistic that scales the geometric tail bound."""
    if trunc < 0:
        raise UsageError("truncation order must be >= 0")
    n = op.size
    log_rho = float(np.log(rho)) if rho > 0 else -np.inf
    v = np.zeros(n)
    v[0] = 1.0
    partial = v.copy()
    log_ratio = np.full(n, -np.inf)
    log_ratio[0] = 0.0  # k = 0 term: v_0(e)/rho^0 = 1
    returns = np.empty(trunc + 1)
    returns[0] = 1.0
    for k in range(1, trunc + 1):
        v = op.step(v)
        partial += v
        with np.errstate(divide="ignore"):
            candidate = np.log(v) - k * log_rho
        np.maximum(log_ratio, candidate, out=log_ratio)
        returns[k] = v[0]
    return GreenAccumulation(
        trunc=trunc, log_rho=log_rho, partial=partial, log_ratio=log_ratio, returns=returns
    )


def run_returns(op: WalkOperator, kmax: int, track_max: bool = False):
    """Return probabilities v_k(e) for k = 0..kmax (killed lower bounds).

    With ``track_max`` also returns max_z v_k(z) per k, used for the
    heuristic decay estimate when no symmetric spectral bound applies.
    """
    n = op.size
    v = np.zeros(n)
    v[0] = 1.0
    returns = np.empty(kmax + 1)
    returns[0] = 1.0
    maxima = np.empty(kmax + 1) if track_max else None
    if track_max:
        maxima[0] = 1.0
    for k in range(1, kmax + 1):
        v = op.step(v)
        returns[k] = v[0]
        if track_max:
            maxima[k] = v.max()
    if track_max:
        return returns, maxima
    return returns


def ball_for_steps(
    model: GroupModel,
    step_length: int,
    kmax: int,
    budget: int,
    returns_only: bool = True,
) -> BallIndex:
    """Ball big enough for exact k-step statistics up to ``kmax``, budget capped.

    For return probabilities a radius of floor(kmax/2) * step_length is
    exact; the adaptive build stops earlier if the budget runs out, in which
    case later steps are killed-walk lower bounds.
    """
    radius = max(1, (kmax // 2 if returns_only else kmax) * step_length)
    return BallIndex.build(model, radius, budget=budget, capture=True, adaptive=True)
