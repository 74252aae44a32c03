import math
import random

import pytest

from walklab import groups, harmonic, measures
from walklab.errors import UsageError
from walklab.potential import GreenCalculator


def busemann(x):
    # 3^(2k - |w|) with k the longest all-a prefix: the classical minimal
    # harmonic function toward the a-direction on the 4-regular tree
    w = x.value
    k = 0
    for letter in w:
        if letter == 0:
            k += 1
        else:
            break
    return 3.0 ** (2 * k - len(w))


def window_function(model, radius, fn):
    ball = groups.word_ball(model, radius)
    return harmonic.WindowFunction(ball, {g: fn(g) for g in ball.elements})


def test_harmonic_residual_examples(free2, free2_srw):
    const = window_function(free2, 2, lambda g: 1.0)
    e = free2.identity()
    assert harmonic.harmonic_residual(const, e, free2_srw) == 0.0

    buse = window_function(free2, 2, busemann)
    assert harmonic.harmonic_residual(buse, e, free2_srw) < 1e-15
    for x in groups.word_ball(free2, 1).elements:
        assert harmonic.harmonic_residual(buse, x, free2_srw) < 1e-12

    z1 = groups.FreeAbelianGroup(1)
    nu = measures.srw(z1)
    spike = window_function(z1, 2, lambda g: 1.0 if g.is_identity() else 0.0)
    assert harmonic.harmonic_residual(spike, z1.identity(), nu) == 1.0


def test_harmonic_residual_window_escape(free2, free2_srw):
    buse = window_function(free2, 1, busemann)
    corner = free2.parse_word("a")
    with pytest.raises(UsageError) as err:
        harmonic.harmonic_residual(buse, corner, free2_srw)
    assert "missing" in str(err.value)


def test_window_function_validation(free2):
    ball = groups.word_ball(free2, 1)
    with pytest.raises(UsageError):
        harmonic.WindowFunction(ball, {ball.elements[0]: 1.0})
    with pytest.raises(UsageError):
        harmonic.WindowFunction(ball, {g: math.nan for g in ball.elements})


def test_classify(free2, free2_srw):
    const = window_function(free2, 2, lambda g: 1.0)
    cls = harmonic.classify(const, free2_srw)
    assert cls.positive and not cls.nonconstant and cls.max_residual == 0.0

    buse = window_function(free2, 2, busemann)
    cls = harmonic.classify(buse, free2_srw)
    assert cls.positive and cls.nonconstant
    assert cls.max_residual < 1e-12
    assert abs(cls.value_ratio - 81.0) < 1e-9  # 3^2 over 3^-2

    with_zero = window_function(free2, 2, lambda g: 0.0 if g.value == b"\x02" else 1.0)
    cls = harmonic.classify(with_zero, free2_srw)
    assert not cls.positive

    tiny = window_function(free2, 0, lambda g: 1.0)
    with pytest.raises(UsageError):
        harmonic.classify(tiny, free2_srw)


def test_martin_limit_free2(free2, free2_srw, free2_calc):
    e = free2.identity()
    zseq = [free2.parse_word("a" * n) for n in range(1, 8)]
    cand, diag = harmonic.martin_limit(
        free2, free2_srw, zseq, e, 2, calculator=free2_calc
    )
    assert diag.diverging
    assert diag.lengths == tuple(range(1, 8))
    assert cand.values[e] == 1.0  # normalization at the origin
    cls = harmonic.classify(cand, free2_srw)
    assert cls.positive and cls.nonconstant and cls.max_residual < 1e-3
    # the limit is the Busemann function; margin-3 table gives ~1%
    for x in cand.window.elements:
        assert abs(cand.values[x] / busemann(x) - 1.0) < 0.05
    assert diag.max_cauchy < 1e-2


def test_martin_limit_constant_sequence_flagged(free2, free2_srw, free2_calc):
    z = free2.parse_word("aaaa")
    cand, diag = harmonic.martin_limit(
        free2, free2_srw, [z, z, z], free2.identity(), 1, calculator=free2_calc
    )
    assert not diag.diverging
    assert diag.max_cauchy == 0.0
    expected = free2_calc.martin(free2.parse_word("a"), z, free2.identity()).value
    assert cand.values[free2.parse_word("a")] == expected


def test_martin_limit_liouville_side(z3, z3_srw, z3_calc):
    # Liouville direction: kernels flatten toward 1 as z diverges.  The
    # exact kernel obeys |K-1| ~ |x| / |z|, so a window-1 candidate from
    # z = a^10 sits within 0.3 of the constant function, and deepening the
    # sequence only improves it; contrast the free group, where the same
    # statistic is 2 at every depth.
    e = z3.identity()

    def worst(nmax):
        zseq = [z3.parse_word("a" * n) for n in range(nmax - 2, nmax + 1)]
        cand, diag = harmonic.martin_limit(z3, z3_srw, zseq, e, 1, calculator=z3_calc)
        assert diag.diverging
        assert cand.values[e] == 1.0
        assert all(v > 0 for v in cand.values.values())
        return max(abs(v - 1.0) for v in cand.values.values())

    w6, w8, w10 = worst(6), worst(8), worst(10)
    assert w10 <= w8 <= w6
    assert w10 < 0.3


def test_product_identity_check(free2, free2_calc):
    assert harmonic.product_identity_check(free2_calc, "a") < 1e-12
    assert harmonic.product_identity_check(free2_calc, "abAb") < 1e-9

    lamp = groups.LamplighterGroup()
    calc = GreenCalculator(lamp, measures.srw(lamp), trunc=300, support_radius=10)
    rng = random.Random(9)
    for _ in range(5):
        word = [rng.choice(lamp.generators) for _ in range(6)]
        assert harmonic.product_identity_check(calc, word) < 1e-6

    with pytest.raises(UsageError):
        harmonic.product_identity_check(free2_calc, "")


def test_obstruction_report_free2(free2, free2_srw, free2_calc):
    report = harmonic.obstruction_report(
        free2, free2_srw, n0=3, window_n=7, trunc=200, calculator=free2_calc
    )
    assert report.verdict == "obstruction-witnessed"
    assert abs(report.delta_hat - 2.0) < 0.1
    assert abs(report.c_hat - 1 / 3) < 1e-3
    assert math.isinf(report.bound_rate)
    assert abs(report.growth_word - math.log(3)) < 0.05
    assert report.chain == ()  # delta_hat >= 1: no containment chain
    assert math.isinf(report.r_of(5))
    d = report.to_dict()
    assert d["verdict"] == "obstruction-witnessed"


def test_obstruction_report_z3(z3, z3_srw, z3_calc):
    report = harmonic.obstruction_report(
        z3, z3_srw, n0=6, window_n=10, trunc=400, calculator=z3_calc
    )
    assert report.verdict == "consistent-with-Liouville"
    assert report.delta_hat < 0.5
    assert report.bound_rate < 0.7
    assert report.growth_word < 0.2
    assert report.bound_rate > report.growth_word + report.margin
    # every word sphere up to the window sits inside the predicted Green ball
    assert report.chain and all(row.ok for row in report.chain)
    assert report.r_of(8) > 0


def test_obstruction_preconditions(free2, free2_srw, z3):
    with pytest.raises(UsageError):
        harmonic.obstruction_report(free2, free2_srw, n0=5, window_n=5, trunc=50)
    one_sided = measures.make_measure(z3, [("a", 1.0)])
    with pytest.raises(UsageError):
        harmonic.obstruction_report(z3, one_sided, n0=2, window_n=4, trunc=50)


def test_obstruction_finite_rejected():
    zmod = groups.FiniteGroup.cyclic(6)
    from walklab.errors import RecurrentWalkError

    with pytest.raises(RecurrentWalkError):
        harmonic.obstruction_report(zmod, measures.srw(zmod), n0=1, window_n=3, trunc=40)
