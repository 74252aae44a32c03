import itertools
import math
import random
from fractions import Fraction

import pytest

from walklab import groups, measures
from walklab.errors import ModelMismatchError, ResourceBudgetError, UsageError


def brute_force_power(model, atoms, k):
    """Exact mu^k by enumerating all |supp|^k paths with Fractions."""
    out = {}
    for path in itertools.product(atoms, repeat=k):
        value = model.identity_value()
        weight = Fraction(1)
        for v, w in path:
            value = model.mul_values(value, v)
            weight *= w
        out[value] = out.get(value, Fraction(0)) + weight
    return out


def test_make_measure_examples(free2, free2_srw):
    assert abs(free2_srw.total() - 1.0) < 1e-12
    assert all(w == 0.25 for _, w in free2_srw.support)

    lazy_half = measures.make_measure(free2, [("e", 0.5), ("a", 0.5)])
    assert lazy_half.mass(free2.identity()) == 0.5

    scaled = measures.make_measure(free2, [("a", 2.0), ("b", 2.0)])
    assert scaled.mass(free2.parse_word("a")) == 0.5
    assert scaled.support_size == 2

    with pytest.raises(UsageError):
        measures.make_measure(free2, [("a", 0.0)])
    z1 = groups.FreeAbelianGroup(1)
    with pytest.raises(ModelMismatchError):
        measures.make_measure(free2, [(z1.identity(), 1.0)])
    with pytest.raises(UsageError):
        measures.make_measure(free2, [("a", -1.0)])


def test_translate(free2, free2_srw):
    e = free2.identity()
    assert measures.translate(free2_srw, e) == free2_srw
    d_a = measures.make_measure(free2, [("a", 1.0)])
    moved = measures.translate(d_a, free2.parse_word("b"))
    assert moved.mass(free2.parse_word("ba")) == 1.0
    rng = random.Random(5)
    for _ in range(20):
        pairs = [
            ("".join(rng.choice("abAB") for _ in range(rng.randint(0, 3))), rng.random() + 0.1)
            for _ in range(4)
        ]
        mu = measures.make_measure(free2, pairs)
        x = free2.parse_word("".join(rng.choice("abAB") for _ in range(3)))
        assert abs(measures.translate(mu, x).total() - 1.0) < 1e-12


def test_convolve_examples(free2):
    d_a = measures.make_measure(free2, [("a", 1.0)])
    d_b = measures.make_measure(free2, [("b", 1.0)])
    assert measures.convolve(d_a, d_b).mass(free2.parse_word("ab")) == 1.0

    mu = measures.srw(free2)
    two = measures.convolve(mu, mu)
    assert abs(two.mass(free2.identity()) - 0.25) < 1e-15

    z1 = groups.FreeAbelianGroup(1)
    nu2 = measures.convolve(measures.srw(z1), measures.srw(z1))
    assert abs(nu2.mass(z1.identity()) - 0.5) < 1e-15
    assert abs(nu2.mass(z1.parse_word("aa")) - 0.25) < 1e-15
    assert abs(nu2.mass(z1.parse_word("AA")) - 0.25) < 1e-15


def test_power_examples(free2, free2_srw):
    p0 = measures.power(free2_srw, 0)
    assert p0.result.mass(free2.identity()) == 1.0

    p4 = measures.power(free2_srw, 4)
    assert abs(p4.result.mass(free2.identity()) - 28 / 256) < 1e-15

    z1 = groups.FreeAbelianGroup(1)
    odd = measures.power(measures.srw(z1), 5)
    assert odd.result.mass(z1.identity()) == 0.0  # bipartite walk

    # translated lookup: mu_x^k(y) = mu^k(x^-1 y)
    x, y = free2.parse_word("b"), free2.parse_word("ba")
    assert p4.mass_at(y, x) == p4.result.mass(free2.parse_word("a"))


@pytest.mark.parametrize("spec,kmax", [("free:2", 6), ("abelian:2", 6)])
def test_power_matches_rational_brute_force(spec, kmax):
    model = groups.model_from_spec(spec)
    mu = measures.srw(model)
    atoms = [(v, Fraction(1, len(mu._pairs))) for v, _ in mu._pairs]
    for k in range(kmax + 1):
        exact = brute_force_power(model, atoms, k)
        computed = measures.power(mu, k).result
        assert computed.support_size == len(exact)
        for value, frac in exact.items():
            got = computed._lookup[value]
            assert abs(got - float(frac)) < 1e-12


def test_power_mass_and_support_bounds(free2, free2_srw):
    w = groups.word_ball(free2, 6)
    for k in range(7):
        pk = measures.power(free2_srw, k)
        assert abs(pk.result.total() - 1.0) <= max(k, 1) * 1e-12
        assert all(g in w for g, _ in pk.result.support)  # supp mu^k in W_k


def test_convolution_associativity(free2):
    rng = random.Random(11)

    def random_measure():
        pairs = [
            ("".join(rng.choice("abAB") for _ in range(rng.randint(0, 3))), rng.random() + 0.05)
            for _ in range(rng.randint(1, 5))
        ]
        return measures.make_measure(free2, pairs)

    for _ in range(15):
        mu, nu, kappa = random_measure(), random_measure(), random_measure()
        left = measures.convolve(measures.convolve(mu, nu), kappa)
        right = measures.convolve(mu, measures.convolve(nu, kappa))
        assert left.support_size == right.support_size
        for v, w in left._pairs:
            assert abs(w - right._lookup[v]) < 1e-12


def test_translation_equivariance(free2):
    rng = random.Random(13)
    for _ in range(10):
        mu = measures.make_measure(
            free2,
            [("".join(rng.choice("abAB") for _ in range(2)), rng.random() + 0.1) for _ in range(3)],
        )
        nu = measures.make_measure(
            free2,
            [("".join(rng.choice("abAB") for _ in range(2)), rng.random() + 0.1) for _ in range(3)],
        )
        x = free2.parse_word("ab")
        lhs = measures.translate(measures.convolve(mu, nu), x)
        rhs = measures.convolve(measures.translate(mu, x), nu)
        assert lhs.support_size == rhs.support_size
        for v, w in lhs._pairs:
            assert abs(w - rhs._lookup[v]) < 1e-12


def test_convolve_budget():
    f3 = groups.FreeGroup(3)
    mu = measures.srw(f3)
    with pytest.raises(ResourceBudgetError):
        measures.power(mu, 8, budget=1000)


def test_nondegenerate(free2, free2_srw):
    assert measures.nondegenerate(free2_srw, 5)

    z1 = groups.FreeAbelianGroup(1)
    one_sided = measures.make_measure(z1, [("a", 1.0)])
    verdict = measures.nondegenerate(one_sided, 2)
    assert not verdict
    # semigroup of {+1} misses everything nonpositive; first gap in BFS
    # order is the identity itself
    assert verdict.first_uncovered.value == (0,)

    z2 = groups.FreeAbelianGroup(2)
    quadrant = measures.make_measure(z2, [("a", 0.5), ("b", 0.5)])
    verdict2 = measures.nondegenerate(quadrant, 3)
    assert not verdict2
    # oracle: the semigroup closure of {e1, e2} is the positive quadrant
    ux, uy = verdict2.first_uncovered.value
    assert ux < 0 or uy < 0 or (ux, uy) == (0, 0)

    with pytest.raises(UsageError):
        measures.nondegenerate(free2_srw, 0)


def test_spectral_radius_free2(free2_srw):
    rho_true = math.sqrt(3) / 2
    # finite-k estimates sit well below the limit: the k^(-3/2) prefactor
    # costs ~exp(-1.5 ln k / k); at kmax=20 the honest value is ~0.734
    rho20 = measures.spectral_radius(free2_srw, 20)
    assert 0.70 < rho20 < 0.75
    rho200 = measures.spectral_radius(free2_srw, 200)
    assert 0.80 <= rho200 <= rho_true + 1e-9
    # monotone in kmax
    rho60 = measures.spectral_radius(free2_srw, 60)
    assert rho20 <= rho60 <= rho200


def test_spectral_radius_edge_cases(free2):
    delta_e = measures.make_measure(free2, [(free2.identity(), 1.0)])
    assert measures.spectral_radius(delta_e, 8) == 1.0

    zmod = groups.FiniteGroup.cyclic(3)
    assert measures.spectral_radius(measures.srw(zmod), 40) > 0.9

    skew = measures.make_measure(free2, [("a", 0.7), ("A", 0.3)])
    with pytest.raises(UsageError):
        measures.spectral_radius(skew, 20)
    with pytest.raises(UsageError):
        measures.spectral_radius(measures.srw(free2), 3)


def test_return_probability_log_subadditivity(free2, free2_srw):
    e = free2.identity()
    values = []
    for k in (2, 4, 6, 8, 10, 12):
        values.append(measures.power(free2_srw, k).result.mass(e) ** (1.0 / k))
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_measure_from_spec(free2, tmp_path):
    assert measures.measure_from_spec(free2, "srw").support_size == 4
    lz = measures.measure_from_spec(free2, "lazy:0.5")
    assert lz.mass(free2.identity()) == 0.5
    csv_path = tmp_path / "mu.csv"
    csv_path.write_text("word,weight\na,1\nA,1\nab,2\n")
    mu = measures.measure_from_spec(free2, str(csv_path))
    assert abs(mu.mass(free2.parse_word("ab")) - 0.5) < 1e-12
    with pytest.raises(UsageError):
        measures.measure_from_spec(free2, "lazy:nope")
    with pytest.raises(UsageError):
        measures.measure_from_spec(free2, str(tmp_path / "missing.csv"))
