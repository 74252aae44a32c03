"""Finitely supported probability measures on a group model.

Measures are immutable; their support is kept sorted by canonical key so
that every accumulation (convolution, normalization) runs in a fixed order
and floating-point results are reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

from .errors import ModelMismatchError, ResourceBudgetError, UsageError
from .groups import BallIndex, GroupElement, GroupModel, word_lengths
from . import walkcore

DEFAULT_SUPPORT_BUDGET = 5_000_000
SYMMETRY_TOL = 1e-12


class Measure:
    """Probability measure with finite support on a group model."""

    __slots__ = ("model", "_pairs", "_lookup", "_cache")

    def __init__(self, model: GroupModel, pairs):
        # pairs: already-normalized (value, weight), sorted by key
        self.model = model
        self._pairs = tuple(pairs)
        self._lookup = {v: w for v, w in self._pairs}
        self._cache = {}

    @property
    def support(self) -> tuple[tuple[GroupElement, float], ...]:
        return tuple((self.model.wrap(v), w) for v, w in self._pairs)

    @property
    def support_size(self) -> int:
        return len(self._pairs)

    def mass(self, g: GroupElement) -> float:
        return self._lookup.get(g.value, 0.0)

    def total(self) -> float:
        return sum(w for _, w in self._pairs)

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        inv = self.model.inv_value
        for v, w in self._pairs:
            if abs(self._lookup.get(inv(v), 0.0) - w) > tol:
                return False
        return True

    def max_step_length(self) -> int:
        """Largest word length in the support (BFS-verified)."""
        if "step_length" not in self._cache:
            lengths = word_lengths(self.model, [g for g, _ in self.support])
            self._cache["step_length"] = max(lengths.values())
        return self._cache["step_length"]

    def spec_string(self) -> str:
        """Deterministic text form, one ``label:weight`` term per atom."""
        return " ".join(
            f"{self.model.label_of(v)}:{w!r}" for v, w in self._pairs
        )

    def __repr__(self) -> str:
        return f"<Measure on {self.model.model_id}, {len(self._pairs)} atoms>"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Measure):
            return NotImplemented
        return self.model.model_id == other.model.model_id and self._pairs == other._pairs

    def __hash__(self) -> int:
        return hash((self.model.model_id, self._pairs))


def make_measure(model: GroupModel, pairs: Iterable) -> Measure:
    """Normalized measure from (element, weight) pairs.

    Elements may be :class:`GroupElement` or word strings; weights must be
    nonnegative with at least one positive.  Zero-weight atoms are dropped
    and duplicate atoms are merged.
    """
    acc: dict = {}
    for g, w in pairs:
        if isinstance(g, str):
            g = model.parse_word(g)
        if not isinstance(g, GroupElement):
            raise UsageError(f"unsupported support entry {g!r}")
        if g.model.model_id != model.model_id:
            raise ModelMismatchError(
                f"support element of {g.model.model_id!r} in measure on {model.model_id!r}"
            )
        w = float(w)
        if w < 0:
            raise UsageError(f"negative weight {w} at {g}")
        if not w == w or w in (float("inf"),):
            raise UsageError(f"non-finite weight at {g}")
        if w > 0:
            acc[g.value] = acc.get(g.value, 0.0) + w
    if not acc:
        raise UsageError("measure needs at least one positive weight")
    items = sorted(acc.items(), key=lambda vw: model.key_of(vw[0]))
    total = sum(w for _, w in items)
    return Measure(model, tuple((v, w / total) for v, w in items))


def srw(model: GroupModel) -> Measure:
    """Simple random walk: uniform on the declared symmetric generators."""
    gens = model.generators
    return make_measure(model, [(g, 1.0) for g in gens])


def lazy(model: GroupModel, p: float) -> Measure:
    """Mass p at the identity, the rest uniform on the generators."""
    if not 0 <= p < 1:
        raise UsageError("lazy parameter must be in [0, 1)")
    gens = model.generators
    q = (1.0 - p) / len(gens)
    pairs = [(model.identity(), p)] if p > 0 else []
    pairs += [(g, q) for g in gens]
    return make_measure(model, pairs)


def measure_from_spec(model: GroupModel, spec: str) -> Measure:
    """Measure from a CLI spec: ``srw``, ``lazy:P``, or a CSV path (word,weight)."""
    spec = spec.strip()
    if spec == "srw":
        return srw(model)
    if spec.startswith("lazy:"):
        try:
            return lazy(model, float(spec.split(":", 1)[1]))
        except ValueError:
            raise UsageError(f"malformed measure spec {spec!r}") from None
    # otherwise treat as a CSV file of word,weight rows
    try:
        with open(spec, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise UsageError(f"cannot read measure spec {spec!r}: {exc}") from None
    pairs = []
    for i, row in enumerate(rows):
        if len(row) != 2:
            raise UsageError(f"{spec}: row {i + 1} is not word,weight")
        word, weight = row[0].strip(), row[1].strip()
        if i == 0 and word.lower() == "word":
            continue  # header
        try:
            pairs.append((word, float(weight)))
        except ValueError:
            raise UsageError(f"{spec}: bad weight {weight!r} on row {i + 1}") from None
    return make_measure(model, pairs)


def translate(mu: Measure, x: GroupElement) -> Measure:
    """Left translate: result(y) = mu(x^-1 y), support x * supp(mu)."""
    model = mu.model
    if x.model.model_id != model.model_id:
        raise ModelMismatchError("translate: element model differs from measure model")
    moved = [(model.mul_values(x.value, v), w) for v, w in mu._pairs]
    moved.sort(key=lambda vw: model.key_of(vw[0]))
    return Measure(model, tuple(moved))


def convolve(mu: Measure, nu: Measure, budget: int = DEFAULT_SUPPORT_BUDGET) -> Measure:
    """(mu * nu)(z) = sum_y mu(y) nu(y^-1 z), by sparse accumulation."""
    model = mu.model
    if nu.model.model_id != model.model_id:
        raise ModelMismatchError("convolve: measures live on different models")
    mulv = model.mul_values
    acc: dict = {}
    for y, wy in mu._pairs:
        for s, ws in nu._pairs:
            z = mulv(y, s)
            acc[z] = acc.get(z, 0.0) + wy * ws
        if len(acc) > budget:
            raise ResourceBudgetError(
                f"convolution support exceeds budget {budget}", partial=len(acc)
            )
    items = sorted(acc.items(), key=lambda vw: model.key_of(vw[0]))
    return Measure(model, tuple(items))


@dataclass(frozen=True)
class ConvolutionPower:
    """k-fold convolution power, with translated mass lookup."""

    base: Measure
    k: int
    result: Measure

    def mass_at(self, y: GroupElement, x: GroupElement | None = None) -> float:
        """Mass of the power started at x (default: identity) evaluated at y."""
        model = self.base.model
        if x is None:
            return self.result.mass(y)
        z = model.wrap(model.mul_values(model.inv_value(x.value), y.value))
        return self.result.mass(z)


def power(mu: Measure, k: int, budget: int = DEFAULT_SUPPORT_BUDGET) -> ConvolutionPower:
    """Iterated convolution power mu^k (left-to-right); mu^0 is delta_e."""
    if k < 0:
        raise UsageError("convolution power needs k >= 0")
    model = mu.model
    result = Measure(model, ((model.identity_value(), 1.0),))
    for i in range(k):
        try:
            result = convolve(result, mu, budget=budget)
        except ResourceBudgetError as exc:
            raise ResourceBudgetError(
                f"power budget exhausted at k={i + 1} of {k}", partial=i
            ) from exc
    return ConvolutionPower(base=mu, k=k, result=result)


@dataclass(frozen=True)
class NondegeneracyReport:
    """Verdict of the radius-limited semigroup coverage check."""

    ok: bool
    radius: int
    first_uncovered: GroupElement | None
    covered: int
    ball_size: int

    def __bool__(self) -> bool:
        return self.ok


def nondegenerate(
    mu: Measure, radius: int, budget: int = DEFAULT_SUPPORT_BUDGET
) -> NondegeneracyReport:
    """Check that the semigroup generated by supp(mu) covers W_radius.

    The closure is computed inside W_radius (products are discarded once
    they leave the ball), so the verdict is "up to radius", as reported.
    """
    if radius < 1:
        raise UsageError("nondegeneracy radius must be >= 1")
    model = mu.model
    ball = BallIndex.build(model, radius, budget=budget)
    covered = bytearray(ball.size)
    frontier = []
    for v, _ in mu._pairs:
        i = ball.index.get(v)
        if i is not None and not covered[i]:
            covered[i] = 1
            frontier.append(v)
    mulv = model.mul_values
    index_get = ball.index.get
    atoms = [v for v, _ in mu._pairs]
    while frontier:
        nxt = []
        for u in frontier:
            for s in atoms:
                w = mulv(u, s)
                j = index_get(w)
                if j is not None and not covered[j]:
                    covered[j] = 1
                    nxt.append(w)
        frontier = nxt
    count = sum(covered)
    if count == ball.size:
        return NondegeneracyReport(True, radius, None, count, ball.size)
    first = next(i for i in range(ball.size) if not covered[i])
    return NondegeneracyReport(
        False, radius, ball.element(first), count, ball.size
    )


def spectral_radius(
    mu: Measure, kmax: int, ball_budget: int = 500_000
) -> float:
    """Estimate the walk's spectral radius from even return probabilities.

    rho_hat = max over even k <= kmax of mu^k(e)^(1/k).  Returns are exact
    while the budgeted ball covers radius k/2 times the step length, and
    killed-walk lower bounds beyond, so the estimate never exceeds the true
    spectral radius and is non-decreasing in kmax.
    """
    if kmax < 4:
        raise UsageError("spectral_radius needs kmax >= 4")
    if not mu.is_symmetric():
        raise UsageError("spectral_radius needs a symmetric measure")
    cache_key = ("rho", kmax, ball_budget)
    if cache_key in mu._cache:
        return mu._cache[cache_key]
    ball = walkcore.ball_for_steps(
        mu.model, mu.max_step_length(), kmax, budget=ball_budget
    )
    op = walkcore.WalkOperator(ball, mu._pairs)
    returns = walkcore.run_returns(op, kmax)
    best = 0.0
    for k in range(2, kmax + 1, 2):
        r = returns[k]
        if r > 0:
            best = max(best, float(r) ** (1.0 / k))
    rho = min(1.0, best)
    mu._cache[cache_key] = rho
    return rho


def decay_estimate(
    mu: Measure, kmax: int, ball_budget: int = 500_000
) -> tuple[float, bool]:
    """(rho_hat, certified) decay-rate estimate for Green tail bounds.

    Symmetric measures get the return-probability estimator (certified);
    otherwise the max-norm decay of the k-step distribution is used and the
    result is flagged heuristic.
    """
    if mu.is_symmetric():
        return spectral_radius(mu, kmax, ball_budget=ball_budget), True
    ball = walkcore.ball_for_steps(
        mu.model, mu.max_step_length(), kmax, budget=ball_budget
    )
    op = walkcore.WalkOperator(ball, mu._pairs)
    _, maxima = walkcore.run_returns(op, kmax, track_max=True)
    best = 0.0
    for k in range(1, kmax + 1):
        if maxima[k] > 0:
            best = max(best, float(maxima[k]) ** (1.0 / k))
    return min(1.0, best), False
