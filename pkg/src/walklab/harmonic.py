"""Harmonicity testing, Martin-limit extraction, and the growth-obstruction
pipeline.

The pipeline mirrors one contradiction argument: if every positive harmonic
function were constant, kernel deviations over growing word balls would
vanish, forcing word spheres into Green balls whose growth is too slow for
an exponential-growth group.  The report measures each ingredient at finite
windows and compares the implied sphere-growth bound against the measured
word growth; all verdicts are empirical, with every window and truncation
order recorded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from . import measures as measures_mod
from .errors import InsufficientTruncationError, UsageError
from .groups import (
    BallIndex,
    GroupElement,
    GroupModel,
    WordBall,
    growth_rate,
    word_ball,
    word_balls,
)
from .measures import Measure
from .potential import GreenCalculator


@dataclass(frozen=True)
class WindowFunction:
    """Real-valued function given on all elements of a word ball."""

    window: WordBall
    values: dict[GroupElement, float]

    def __post_init__(self):
        missing = [g for g in self.window.elements if g not in self.values]
        if missing:
            raise UsageError(
                f"window function missing values at {len(missing)} elements, "
                f"first {missing[0]}"
            )
        bad = [g for g, v in self.values.items() if not math.isfinite(v)]
        if bad:
            raise UsageError(f"window function has non-finite value at {bad[0]}")

    def __call__(self, g: GroupElement) -> float:
        return self.values[g]

    def interior(self, mu: Measure) -> list[GroupElement]:
        """Elements whose full one-step neighbourhood stays in the window."""
        atoms = [g for g, _ in mu.support]
        inside = self.window.element_set
        return [
            x
            for x in self.window.elements
            if all((x * s) in inside for s in atoms)
        ]


def harmonic_residual(f: WindowFunction, x: GroupElement, mu: Measure) -> float:
    """|f(x) - sum_s mu(s) f(x s)|, the one-step mean-value defect at x."""
    if x not in f.values:
        raise UsageError(f"{x} is outside the window of f")
    total = 0.0
    missing = []
    for s, w in mu.support:
        y = x * s
        v = f.values.get(y)
        if v is None:
            missing.append(y)
        else:
            total += w * v
    if missing:
        labels = ", ".join(str(m) for m in missing[:8])
        raise UsageError(
            f"support of the measure escapes the window at x = {x}: missing {labels}"
        )
    return abs(f.values[x] - total)


@dataclass(frozen=True)
class MartinDiagnostics:
    """Convergence bookkeeping for a Martin-limit extraction."""

    diverging: bool  # strictly increasing word lengths, no repeats
    lengths: tuple[int, ...]
    terms: int
    max_cauchy: float  # largest step among the last three evaluations
    cauchy: dict[GroupElement, float]


def martin_limit(
    model: GroupModel,
    mu: Measure,
    zseq: Sequence[GroupElement],
    y: GroupElement,
    window_n: int,
    trunc: int = 200,
    support_radius: int | None = None,
    calculator: GreenCalculator | None = None,
    **calc_kwargs,
) -> tuple[WindowFunction, MartinDiagnostics]:
    """Evaluate K_y(., z_n) on a word-ball window along a diverging sequence.

    The candidate is the final-term evaluation; per-window-point Cauchy
    deltas over the last three terms diagnose stabilization.  A non-diverging
    sequence is flagged in the diagnostics, not rejected.

    The calculator table must cover word length max|z| + window_n; keep a
    few extra radii of margin, since values near the table rim are biased
    low by the killed-walk restriction.
    """
    if not zseq:
        raise UsageError("martin_limit needs a nonempty sequence")
    calc = calculator
    if calc is None:
        from .groups import word_lengths

        zlen = word_lengths(model, list(zseq))
        needed = max(zlen.values()) + window_n
        radius = support_radius if support_radius is not None else needed + 3
        if radius < needed:
            raise UsageError(
                f"support_radius {radius} cannot cover window {window_n} around z "
                f"of length {max(zlen.values())}"
            )
        calc = GreenCalculator(model, mu, trunc=trunc, support_radius=radius, **calc_kwargs)
    window = word_ball(model, window_n)

    lengths = []
    for z in zseq:
        ell = calc.word_length_of(z)
        if ell is None:
            raise InsufficientTruncationError(
                f"z = {z} lies outside the table (radius {calc.table_radius})"
            )
        lengths.append(ell)
    diverging = all(b > a for a, b in zip(lengths, lengths[1:])) and len(
        set(g.value for g in zseq)
    ) == len(zseq)

    tail_terms = list(zseq[-3:])
    history: dict[GroupElement, list[float]] = {x: [] for x in window.elements}
    for z in tail_terms:
        for x in window.elements:
            history[x].append(calc.martin(x, z, y).value)
    candidate = WindowFunction(
        window=window, values={x: vals[-1] for x, vals in history.items()}
    )
    cauchy = {
        x: max(
            (abs(vals[i + 1] - vals[i]) for i in range(len(vals) - 1)), default=0.0
        )
        for x, vals in history.items()
    }
    diagnostics = MartinDiagnostics(
        diverging=diverging,
        lengths=tuple(lengths),
        terms=len(zseq),
        max_cauchy=max(cauchy.values()),
        cauchy=cauchy,
    )
    return candidate, diagnostics


@dataclass(frozen=True)
class Classification:
    """classify() output: positivity, non-constancy, and residual size."""

    positive: bool
    nonconstant: bool
    max_residual: float
    value_ratio: float  # max/min over the window; inf if any value <= 0
    interior_size: int


def classify(candidate: WindowFunction, mu: Measure, tol: float = 0.05) -> Classification:
    """Check positivity, a max/min ratio above 1 + tol, and interior residuals."""
    interior = candidate.interior(mu)
    if not interior:
        raise UsageError(
            "window too small: no interior point has its one-step neighbourhood inside"
        )
    values = list(candidate.values.values())
    positive = all(v > 0 for v in values)
    vmax, vmin = max(values), min(values)
    ratio = math.inf if vmin <= 0 else vmax / vmin
    max_residual = max(harmonic_residual(candidate, x, mu) for x in interior)
    return Classification(
        positive=positive,
        nonconstant=ratio > 1.0 + tol,
        max_residual=max_residual,
        value_ratio=ratio,
        interior_size=len(interior),
    )


VERDICT_OBSTRUCTION = "obstruction-witnessed"
VERDICT_LIOUVILLE = "consistent-with-Liouville"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ChainCheckRow:
    """Sphere-by-sphere containment check of word spheres in Green balls."""

    n: int
    max_dg: float
    r_n: float
    ok: bool


@dataclass(frozen=True)
class ObstructionReport:
    """Measured ingredients of the growth-obstruction argument.

    delta_hat is the largest kernel deviation over the scan window once
    W_n0 is excluded; c_hat is the smallest kernel value over W_n0.  When
    delta_hat < 1 these combine into the sphere-radius bound
    r(n) = -(n - n0) ln(1 - delta_hat) - n0 ln(c_hat), whose slope
    bound_rate is compared against the measured word growth.
    """

    model_id: str
    measure_spec: str
    n0: int
    window: int
    trunc: int
    support_radius: int
    delta_hat: float
    c_hat: float
    bound_rate: float  # -ln(1 - delta_hat); +inf when delta_hat >= 1
    growth_word: float
    growth_radius: int
    margin: float
    verdict: str
    per_generator: dict[str, float]
    chain: tuple[ChainCheckRow, ...]
    rho_hat: float
    tail_mode: str

    def r_of(self, n: int) -> float:
        """Green-ball radius that the argument assigns to word length n."""
        if self.delta_hat >= 1.0:
            return math.inf
        return -(n - self.n0) * math.log1p(-self.delta_hat) - self.n0 * math.log(
            self.c_hat
        )

    def to_dict(self) -> dict:
        return {
            "model": self.model_id,
            "measure": self.measure_spec,
            "n0": self.n0,
            "window": self.window,
            "trunc": self.trunc,
            "support_radius": self.support_radius,
            "delta_hat": self.delta_hat,
            "c_hat": self.c_hat,
            "bound_rate": self.bound_rate,
            "growth_word": self.growth_word,
            "growth_radius": self.growth_radius,
            "margin": self.margin,
            "verdict": self.verdict,
            "per_generator": dict(self.per_generator),
            "chain": [
                {"n": row.n, "max_dg": row.max_dg, "r_n": row.r_n, "ok": row.ok}
                for row in self.chain
            ],
            "rho_hat": self.rho_hat,
            "tail_mode": self.tail_mode,
        }


def obstruction_report(
    model: GroupModel,
    mu: Measure,
    n0: int,
    window_n: int,
    trunc: int,
    support_radius: int | None = None,
    margin: float = 0.05,
    growth_max_radius: int = 24,
    growth_budget: int = 100_000,
    calculator: GreenCalculator | None = None,
    **calc_kwargs,
) -> ObstructionReport:
    """Assemble the finite-window obstruction diagnostics.

    Requires mu non-degenerate to radius n0 and window_n > n0.  The verdict
    is ``obstruction-witnessed`` when delta_hat >= 1 or when the implied
    growth bound falls short of the measured word growth by more than
    ``margin``; ``consistent-with-Liouville`` when the bound clears the
    measured growth by ``margin``; ``inconclusive`` in between.
    """
    if window_n <= n0:
        raise UsageError("window_n must exceed n0")
    nd = measures_mod.nondegenerate(mu, n0)
    if not nd:
        raise UsageError(
            f"measure is degenerate to radius {n0}: first uncovered {nd.first_uncovered}"
        )
    calc = calculator
    if calc is None:
        # rim margin: kernel values near the table edge are biased low
        radius = (
            support_radius
            if support_radius is not None
            else window_n + mu.max_step_length() + 4
        )
        calc = GreenCalculator(model, mu, trunc=trunc, support_radius=radius, **calc_kwargs)
    if calc.table_radius < window_n + mu.max_step_length():
        raise UsageError(
            f"table radius {calc.table_radius} too small for window {window_n} "
            f"plus one step"
        )
    e = model.identity()
    base = word_ball(model, n0)
    per_generator: dict[str, float] = {}
    delta_hat = 0.0
    for name, h in zip(model.generator_names, model.generators):
        stat = calc.deviation(base, e, h, window_n)
        per_generator[name] = stat.value
        delta_hat = max(delta_hat, stat.value)

    c_hat = math.inf
    for h in model.generators:
        for z in base.elements:
            c_hat = min(c_hat, calc.martin(e, z, h).value)
    if c_hat <= 0:
        raise InsufficientTruncationError("kernel floor c_hat is not positive")

    bound_rate = math.inf if delta_hat >= 1.0 else -math.log1p(-delta_hat)

    growth_ball = BallIndex.build(
        model, growth_max_radius, budget=growth_budget, adaptive=True
    )
    growth_radius = growth_ball.radius
    balls = word_balls(model, growth_radius, budget=growth_budget + 1)
    growth = growth_rate(balls)

    chain: list[ChainCheckRow] = []
    if delta_hat < 1.0:
        log_c = math.log(c_hat)
        slope = -math.log1p(-delta_hat)
        log_gee = math.log(calc._value_at(0).midpoint)
        for n in range(n0 + 1, window_n + 1):
            r_n = (n - n0) * slope - n0 * log_c
            max_dg = 0.0
            sl = calc.ball.sphere_slice(n)
            for i in range(sl.start, sl.stop):
                gxe = calc._value_at(i)
                if gxe.lower <= 0:
                    raise InsufficientTruncationError(
                        f"d_g undefined on sphere {n}: zero lower bracket"
                    )
                max_dg = max(max_dg, log_gee - math.log(gxe.midpoint))
            chain.append(ChainCheckRow(n=n, max_dg=max_dg, r_n=r_n, ok=max_dg <= r_n))

    if delta_hat >= 1.0 or bound_rate < growth.rate - margin:
        verdict = VERDICT_OBSTRUCTION
    elif bound_rate >= growth.rate + margin:
        verdict = VERDICT_LIOUVILLE
    else:
        verdict = VERDICT_INCONCLUSIVE

    return ObstructionReport(
        model_id=model.model_id,
        measure_spec=mu.spec_string(),
        n0=n0,
        window=window_n,
        trunc=calc.trunc,
        support_radius=calc.table_radius,
        delta_hat=delta_hat,
        c_hat=c_hat,
        bound_rate=bound_rate,
        growth_word=growth.rate,
        growth_radius=growth_radius,
        margin=margin,
        verdict=verdict,
        per_generator=per_generator,
        chain=tuple(chain),
        rho_hat=calc.rho_hat,
        tail_mode=calc.tail_mode,
    )


def product_identity_check(
    calc: GreenCalculator, word: Sequence[GroupElement] | str
) -> float:
    """Relative gap between g(e, x) and the telescoped kernel product.

    For x = h_1 ... h_n the product of K_{h_{i+1}}(e, x_i^-1 x) times
    g(e, e) telescopes to g(e, x) identically, so the residual measures
    only table lookup consistency (it is float-roundoff for any usable
    truncation).
    """
    model = calc.model
    if isinstance(word, str):
        letters = [model.generator(t) for t in model._tokenize(word)]
    else:
        letters = list(word)
    if not letters:
        raise UsageError("product identity needs a word of length >= 1")
    e = model.identity()
    x = e
    for h in letters:
        x = x * h
    product = 1.0
    xi = e
    for h in letters:
        z = xi.inverse() * x
        product *= calc.martin(e, z, h).value
        xi = xi * h
    gx = calc.green(e, x)
    if gx.lower <= 0:
        raise InsufficientTruncationError(f"g(e, {x}) vanishes at truncation {calc.trunc}")
    gee = calc.green(e, e)
    return abs(gx.midpoint - product * gee.midpoint) / gx.midpoint
