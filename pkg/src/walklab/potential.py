"""Green function, Green metric, Green balls, Martin kernels, and kernel
deviation statistics for a transient random walk on a group model.

A :class:`GreenCalculator` runs one killed-walk sweep over a word ball and
answers every query from the resulting table.  Green values are brackets:
the lower end is the truncated series (a true lower bound), the upper end
adds a geometric tail scaled by the largest observed step-decay ratio.  The
spatial restriction to the ball biases both ends low by the mass of paths
that leave the ball and return; that bias is negligible once the table
radius comfortably exceeds the word length of the queried points, and the
table radius is always reported alongside results.

Ratios (metric, kernels) are formed in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from . import measures, walkcore
from .errors import (
    InsufficientTruncationError,
    RecurrentWalkError,
    UsageError,
)
from .groups import BallIndex, GroupElement, GroupModel, WordBall

GEOMETRIC = "geometric-bound"
HEURISTIC = "heuristic"

# Default element budget for the calculator's table. The groups module
# allows 1e7 elements per enumeration; Green tables carry several float
# arrays per element, so their default is tighter.
DEFAULT_TABLE_BUDGET = 2_000_000
RHO_BALL_BUDGET = 200_000


@dataclass(frozen=True)
class GreenValue:
    """Bracketed estimate of a Green function value."""

    lower: float
    upper: float
    trunc: int
    tail_mode: str

    @property
    def midpoint(self) -> float:
        if math.isinf(self.upper):
            return self.lower
        return 0.5 * (self.lower + self.upper)

    @property
    def halfwidth(self) -> float:
        if math.isinf(self.upper):
            return math.inf
        return 0.5 * (self.upper - self.lower)


@dataclass(frozen=True)
class Estimate:
    """A value with a propagated uncertainty radius."""

    value: float
    uncertainty: float


@dataclass(frozen=True)
class MetricBall:
    """Elements certified inside the Green ball of radius r."""

    r: float
    elements: tuple[GroupElement, ...]
    search_radius: int
    complete: bool

    @property
    def size(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class DeviationStat:
    """sup_z |K_y(x, z) - 1| over a finite scan window."""

    value: float
    window: int
    excluded: frozenset
    argmax: GroupElement
    scanned: int


class GreenCalculator:
    """Truncated Green-function table for one (model, measure) pair.

    Parameters
    ----------
    trunc : truncation order K of the series sum_{k<=K} mu^k.
    support_radius : word radius of the table; defaults to the largest
        radius the element budget allows (never more than trunc times the
        maximal step length).
    rho : optional decay-rate override; otherwise estimated from the
        measure (certified for symmetric measures, heuristic else).
    allow_recurrent : skip the structural transience gate (finite models
        and polynomial growth of degree <= 2 are refused by default).
    """

    def __init__(
        self,
        model: GroupModel,
        mu: measures.Measure,
        trunc: int,
        support_radius: int | None = None,
        budget: int = DEFAULT_TABLE_BUDGET,
        rho: float | None = None,
        rho_kmax: int = 64,
        allow_recurrent: bool = False,
        divergence_threshold: float = 1e3,
    ):
        if mu.model.model_id != model.model_id:
            raise UsageError("measure lives on a different model")
        if trunc < 0:
            raise UsageError("truncation order must be >= 0")
        degree = model.polynomial_growth_degree()
        if degree is not None and degree <= 2 and not allow_recurrent:
            raise RecurrentWalkError(
                f"walks on {model.model_id} (polynomial growth degree {degree}) are "
                "recurrent; Green series diverge. Pass allow_recurrent=True to override."
            )
        self.model = model
        self.measure = mu
        self.trunc = trunc

        step = mu.max_step_length()
        if rho is not None:
            self.rho_hat, certified = float(rho), mu.is_symmetric()
        else:
            self.rho_hat, certified = measures.decay_estimate(
                mu, rho_kmax, ball_budget=min(budget, RHO_BALL_BUDGET)
            )
        self.tail_mode = GEOMETRIC if certified else HEURISTIC

        if support_radius is None:
            radius = trunc * step
            self.ball = BallIndex.build(
                model, radius, budget=budget, capture=True, adaptive=True
            )
        else:
            self.ball = BallIndex.build(
                model, support_radius, budget=budget, capture=True
            )
        op = walkcore.WalkOperator(self.ball, mu._pairs)
        acc = walkcore.accumulate_green(op, trunc, self.rho_hat)
        self._partial = acc.partial
        self._log_ratio = acc.log_ratio
        self.returns = acc.returns

        if self._partial[0] > divergence_threshold and self.rho_hat > 0.99:
            raise RecurrentWalkError(
                f"partial Green sums at the identity exceed {divergence_threshold} with "
                f"rho_hat = {self.rho_hat:.6f}; the walk looks recurrent"
            )

        # per-element geometric tail: ratio * rho^(K+1) / (1 - rho)
        if self.rho_hat >= 1.0:
            tail = np.full(self.ball.size, np.inf)
            self._log_tail_scale = math.inf
        else:
            self._log_tail_scale = (trunc + 1) * math.log(self.rho_hat) - math.log1p(
                -self.rho_hat
            )
            with np.errstate(over="ignore"):
                tail = np.exp(self._log_ratio + self._log_tail_scale)
        self._tail = tail
        self._upper = self._partial + self._tail

    # --- provenance -------------------------------------------------------

    @property
    def table_radius(self) -> int:
        return self.ball.radius

    def params(self) -> dict:
        return {
            "model": self.model.model_id,
            "measure": self.measure.spec_string(),
            "trunc": self.trunc,
            "support_radius": self.table_radius,
            "table_size": self.ball.size,
            "rho_hat": self.rho_hat,
            "tail_mode": self.tail_mode,
        }

    # --- low-level access --------------------------------------------------

    def index_of(self, z: GroupElement) -> int | None:
        return self.ball.index.get(z.value)

    def word_length_of(self, z: GroupElement) -> int | None:
        i = self.index_of(z)
        return None if i is None else int(self.ball.word_length[i])

    def _require_window(self, window_n: int) -> None:
        if window_n > self.ball.radius:
            raise UsageError(
                f"window radius {window_n} exceeds table radius {self.ball.radius}; "
                "rebuild with a larger support_radius"
            )

    def _value_at(self, i: int | None) -> GreenValue:
        if i is None:
            # outside the table: any path there needs more than table_radius
            # steps, so only the tail beyond max(trunc, radius) can contribute
            k0 = max(self.trunc, self.ball.radius)
            if self.rho_hat >= 1.0:
                upper = math.inf
            else:
                cap = 0.0
                if self.tail_mode == HEURISTIC:
                    finite = self._log_ratio[np.isfinite(self._log_ratio)]
                    if finite.size:
                        cap = float(finite.max())
                upper = math.exp(
                    cap + (k0 + 1) * math.log(self.rho_hat) - math.log1p(-self.rho_hat)
                )
            return GreenValue(0.0, upper, self.trunc, self.tail_mode)
        return GreenValue(
            float(self._partial[i]),
            float(self._upper[i]),
            self.trunc,
            self.tail_mode,
        )

    def _mid(self, i: int) -> float:
        upper = self._upper[i]
        if math.isinf(upper):
            return float(self._partial[i])
        return 0.5 * (float(self._partial[i]) + float(upper))

    # --- public operations --------------------------------------------------

    def green(self, x: GroupElement, y: GroupElement) -> GreenValue:
        """Bracket of g(x, y), evaluated as g(e, x^-1 y) by left-invariance."""
        model = self.model
        z = model.mul_values(model.inv_value(x.value), y.value)
        return self._value_at(self.ball.index.get(z))

    def green_metric(self, x: GroupElement, y: GroupElement) -> Estimate:
        """ln g(e,e) - ln g(x,y) as midpoint plus half-width of the log bracket."""
        gee = self._value_at(0)
        gxy = self.green(x, y)
        if gxy.lower <= 0.0:
            raise InsufficientTruncationError(
                f"g({x}, {y}) has zero lower bracket at truncation {self.trunc}"
            )
        lo = math.log(gee.lower) - math.log(gxy.upper)
        hi = math.log(gee.upper) - math.log(gxy.lower)
        return Estimate(0.5 * (lo + hi), 0.5 * (hi - lo))

    def martin(self, x: GroupElement, z: GroupElement, y: GroupElement) -> Estimate:
        """Martin kernel K_y(x, z) = g(x,z)/g(y,z) from bracket midpoints."""
        model = self.model
        zi = self.ball.index.get(model.mul_values(model.inv_value(x.value), z.value))
        zj = self.ball.index.get(model.mul_values(model.inv_value(y.value), z.value))
        gx = self._value_at(zi)
        gy = self._value_at(zj)
        if gx.lower <= 0.0:
            raise InsufficientTruncationError(
                f"martin kernel: g({x}, {z}) vanishes at truncation {self.trunc}"
            )
        if gy.lower <= 0.0:
            raise InsufficientTruncationError(
                f"martin kernel: g({y}, {z}) vanishes at truncation {self.trunc}"
            )
        value = gx.midpoint / gy.midpoint
        rel = 0.0
        for gv in (gx, gy):
            rel += math.inf if math.isinf(gv.halfwidth) else gv.halfwidth / gv.midpoint
        return Estimate(value, abs(value) * rel)

    def green_ball(self, r: float, search_n: int | None = None) -> MetricBall:
        """Elements with certified d_g(e, x) <= r found inside W_search_n.

        ``complete`` records whether the scan radius certifiably exhausted
        the metric ball: the smallest possible d_g on the outermost sphere
        must already exceed r.
        """
        if r <= 0:
            raise UsageError("green ball radius must be > 0")
        search_n = self.ball.radius if search_n is None else search_n
        self._require_window(search_n)
        size = self.ball.ball_size(search_n)
        with np.errstate(divide="ignore"):
            log_lower = np.log(self._partial[:size])
            log_upper = np.log(self._upper[:size])
        log_ee_lo = math.log(self._partial[0])
        log_ee_hi = math.log(self._upper[0]) if not math.isinf(self._upper[0]) else math.inf
        dg_hi = log_ee_hi - log_lower  # certain upper bound of d_g
        dg_lo = log_ee_lo - log_upper
        inside = np.flatnonzero(dg_hi <= r)
        elements = tuple(self.ball.element(int(i)) for i in inside)
        sl = self.ball.sphere_slice(search_n)
        sphere_min = float(dg_lo[sl].min()) if sl.stop > sl.start else math.inf
        return MetricBall(
            r=r, elements=elements, search_radius=search_n, complete=sphere_min > r
        )

    def deviation(
        self,
        excluded,
        x: GroupElement,
        y: GroupElement,
        window_n: int,
    ) -> DeviationStat:
        """sup over z in W_window_n minus ``excluded`` of |K_y(x,z) - 1|."""
        self._require_window(window_n)
        if isinstance(excluded, WordBall):
            excluded_values = {g.value for g in excluded.elements}
            excluded_set = frozenset(excluded.elements)
        else:
            excluded_set = frozenset(excluded)
            excluded_values = {g.value for g in excluded_set}
        model = self.model
        mulv = model.mul_values
        x_inv = model.inv_value(x.value)
        y_inv = model.inv_value(y.value)
        index_get = self.ball.index.get
        best = -1.0
        witness = None
        scanned = 0
        for zv in self.ball.values[: self.ball.ball_size(window_n)]:
            if zv in excluded_values:
                continue
            scanned += 1
            i = index_get(mulv(x_inv, zv))
            j = index_get(mulv(y_inv, zv))
            if i is None or j is None or self._partial[i] <= 0 or self._partial[j] <= 0:
                raise InsufficientTruncationError(
                    f"kernel undefined at z = {model.label_of(zv)}; enlarge the table "
                    f"(radius {self.ball.radius}, trunc {self.trunc})"
                )
            gap = abs(self._mid(i) / self._mid(j) - 1.0)
            if gap > best:
                best = gap
                witness = zv
        if scanned == 0:
            raise UsageError("deviation scan window is empty after exclusion")
        return DeviationStat(
            value=best,
            window=window_n,
            excluded=excluded_set,
            argmax=model.wrap(witness),
            scanned=scanned,
        )
