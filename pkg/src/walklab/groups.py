"""Group models, element arithmetic, and word-metric geometry.

Each model gives its elements a canonical hashable *value* (bytes for free
groups, small tuples elsewhere) so that value equality is group-element
equality.  ``GroupElement`` is a thin wrapper around a value; all arithmetic
is delegated to the owning model.  Ball enumeration is breadth-first with a
fixed generator order and key-byte tie-breaking, so every enumeration is
bit-reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ModelMismatchError, ResourceBudgetError, UsageError

DEFAULT_ELEMENT_BUDGET = 10_000_000


def canonical_key(value) -> bytes:
    """Serialize a canonical element value to bytes, injectively per model."""
    if isinstance(value, bytes):
        return value
    out = bytearray()
    _encode_into(value, out)
    return bytes(out)


def _encode_into(v, out: bytearray) -> None:
    if isinstance(v, bool):  # guard: bool is an int subclass
        raise TypeError("boolean element values are not supported")
    if isinstance(v, int):
        out += b"i%d;" % v
    elif isinstance(v, bytes):
        out += b"b%d:" % len(v)
        out += v
    elif isinstance(v, str):
        raw = v.encode("utf-8")
        out += b"s%d:" % len(raw)
        out += raw
    elif isinstance(v, tuple):
        out += b"("
        for item in v:
            _encode_into(item, out)
        out += b")"
    else:
        raise TypeError(f"cannot encode element value of type {type(v)!r}")


class GroupElement:
    """Immutable element of a :class:`GroupModel`.

    Equality and hashing use the canonical value, so two elements compare
    equal exactly when they represent the same group element of the same
    model.
    """

    __slots__ = ("model", "value", "_key")

    def __init__(self, model: "GroupModel", value):
        self.model = model
        self.value = value
        self._key = None

    @property
    def key(self) -> bytes:
        """Canonical byte encoding, unique per element within the model."""
        if self._key is None:
            self._key = canonical_key(self.value)
        return self._key

    @property
    def model_id(self) -> str:
        return self.model.model_id

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return mul(self, other)

    def inverse(self) -> "GroupElement":
        return self.model.wrap(self.model.inv_value(self.value))

    def is_identity(self) -> bool:
        return self.value == self.model.identity_value()

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.model.model_id == other.model.model_id and self.value == other.value

    def __hash__(self) -> int:
        return hash((self.model.model_id, self.value))

    def __repr__(self) -> str:
        return f"<{self.model.model_id}: {self.model.label_of(self.value)}>"

    def __str__(self) -> str:
        return self.model.label_of(self.value)


def mul(g: GroupElement, h: GroupElement) -> GroupElement:
    """Product g*h in the shared model; raises on model mismatch."""
    if g.model.model_id != h.model.model_id:
        raise ModelMismatchError(
            f"elements of {g.model.model_id!r} and {h.model.model_id!r} cannot be multiplied"
        )
    return g.model.wrap(g.model.mul_values(g.value, h.value))


def inv(g: GroupElement) -> GroupElement:
    """Inverse element; mul(g, inv(g)) is the identity."""
    return g.inverse()


class GroupModel:
    """Base class for finitely generated group models.

    Subclasses define the canonical value representation and the group law;
    this class supplies element wrapping, parsing, and validation.  Models
    and elements are immutable after construction.
    """

    kind: str = "abstract"
    model_id: str = "abstract"

    # subclasses fill these in __init__
    generator_names: tuple[str, ...] = ()
    _generator_values: tuple = ()

    # --- group law -------------------------------------------------------

    def identity_value(self):
        raise NotImplementedError

    def mul_values(self, u, v):
        raise NotImplementedError

    def inv_value(self, v):
        raise NotImplementedError

    def label_of(self, value) -> str:
        raise NotImplementedError

    def key_of(self, value) -> bytes:
        return canonical_key(value)

    # --- wrappers ---------------------------------------------------------

    def wrap(self, value) -> GroupElement:
        return GroupElement(self, value)

    def identity(self) -> GroupElement:
        return self.wrap(self.identity_value())

    @property
    def generators(self) -> tuple[GroupElement, ...]:
        return tuple(self.wrap(v) for v in self._generator_values)

    def generator(self, name: str) -> GroupElement:
        try:
            i = self.generator_names.index(name)
        except ValueError:
            raise UsageError(f"unknown generator {name!r} for model {self.model_id}") from None
        return self.wrap(self._generator_values[i])

    def polynomial_growth_degree(self) -> int | None:
        """Degree of polynomial word growth, or None for superpolynomial."""
        raise NotImplementedError

    # --- parsing ----------------------------------------------------------

    def parse_word(self, word: str) -> GroupElement:
        """Product of generators named by the letters of ``word``.

        ``"e"`` (or the empty string) is the identity.  By default each
        character is one generator name; models with multi-character names
        override tokenization.
        """
        word = word.strip()
        if word in ("", "e"):
            return self.identity()
        value = self.identity_value()
        for token in self._tokenize(word):
            try:
                i = self.generator_names.index(token)
            except ValueError:
                raise UsageError(
                    f"unknown generator {token!r} in word {word!r} for model {self.model_id}"
                ) from None
            value = self.mul_values(value, self._generator_values[i])
        return self.wrap(value)

    def _tokenize(self, word: str) -> list[str]:
        return [c for c in word if not c.isspace()]

    # --- validation -------------------------------------------------------

    def validate(self, radius: int = 3, samples: int = 100, seed: int = 0) -> None:
        """Sampled sanity checks of the group axioms and the generating set.

        Verifies that the generator list is closed under inversion, that
        identity/inverse/associativity hold on random words of length up to
        ``radius``, and that BFS spheres do not stall prematurely (for an
        infinite model a stalled sphere would mean the generators only span
        a finite subgroup).
        """
        gen_set = set(self._generator_values)
        for v in self._generator_values:
            if self.inv_value(v) not in gen_set:
                raise UsageError(
                    f"generating set of {self.model_id} is not symmetric at {self.label_of(v)}"
                )
        rng = random.Random(seed)
        e = self.identity_value()
        gens = self._generator_values

        def random_value():
            value = e
            for _ in range(rng.randrange(0, radius + 1)):
                value = self.mul_values(value, rng.choice(gens))
            return value

        for _ in range(samples):
            a, b, c = random_value(), random_value(), random_value()
            left = self.mul_values(self.mul_values(a, b), c)
            right = self.mul_values(a, self.mul_values(b, c))
            if left != right:
                raise UsageError(f"associativity fails in {self.model_id}")
            if self.mul_values(a, e) != a or self.mul_values(e, a) != a:
                raise UsageError(f"identity law fails in {self.model_id}")
            if self.mul_values(a, self.inv_value(a)) != e:
                raise UsageError(f"inverse law fails in {self.model_id}")
        ball = BallIndex.build(self, radius, budget=DEFAULT_ELEMENT_BUDGET)
        for r in range(1, radius + 1):
            if ball.sphere_sizes[r] == 0:
                if self.polynomial_growth_degree() != 0 or not self._saturated(ball):
                    raise UsageError(
                        f"generators of {self.model_id} stall at radius {r}; "
                        "the declared set does not generate"
                    )
                break

    def _saturated(self, ball: "BallIndex") -> bool:
        return False

    def __repr__(self) -> str:
        return f"<GroupModel {self.model_id}>"


# ---------------------------------------------------------------------------
# concrete models
# ---------------------------------------------------------------------------


class FreeGroup(GroupModel):
    """Free group of finite rank; values are freely reduced byte words.

    Letter encoding: generator j is byte 2j, its inverse is byte 2j+1, so a
    letter is inverted by flipping the lowest bit.
    """

    kind = "free"

    def __init__(self, rank: int):
        if rank < 1:
            raise UsageError("free group rank must be >= 1")
        if rank > 26:
            raise UsageError("free group rank capped at 26 (one letter per generator)")
        self.rank = rank
        self.model_id = f"free:{rank}"
        names = []
        values = []
        for j in range(rank):
            names += [chr(ord("a") + j), chr(ord("A") + j)]
            values += [bytes([2 * j]), bytes([2 * j + 1])]
        self.generator_names = tuple(names)
        self._generator_values = tuple(values)

    def identity_value(self) -> bytes:
        return b""

    def mul_values(self, u: bytes, v: bytes) -> bytes:
        i = 0
        nu, nv = len(u), len(v)
        m = nu if nu < nv else nv
        while i < m and u[nu - 1 - i] == v[i] ^ 1:
            i += 1
        if i:
            return u[: nu - i] + v[i:]
        return u + v

    def inv_value(self, v: bytes) -> bytes:
        return bytes(b ^ 1 for b in reversed(v))

    def label_of(self, value: bytes) -> str:
        if not value:
            return "e"
        return "".join(self.generator_names[b] for b in value)

    def polynomial_growth_degree(self) -> int | None:
        return 1 if self.rank == 1 else None


class FreeAbelianGroup(GroupModel):
    """Z^d with generator names a, b, c, ...; values are integer vectors."""

    kind = "abelian"

    def __init__(self, dim: int):
        if dim < 1:
            raise UsageError("free abelian dimension must be >= 1")
        if dim > 26:
            raise UsageError("free abelian dimension capped at 26")
        self.dim = dim
        self.model_id = f"abelian:{dim}"
        names = []
        values = []
        for j in range(dim):
            e_j = tuple(1 if i == j else 0 for i in range(dim))
            names += [chr(ord("a") + j), chr(ord("A") + j)]
            values += [e_j, tuple(-x for x in e_j)]
        self.generator_names = tuple(names)
        self._generator_values = tuple(values)

    def identity_value(self) -> tuple:
        return (0,) * self.dim

    def mul_values(self, u: tuple, v: tuple) -> tuple:
        return tuple(a + b for a, b in zip(u, v))

    def inv_value(self, v: tuple) -> tuple:
        return tuple(-a for a in v)

    def label_of(self, value: tuple) -> str:
        return "(" + ",".join(str(a) for a in value) + ")"

    def polynomial_growth_degree(self) -> int | None:
        return self.dim


class HeisenbergGroup(GroupModel):
    """Discrete Heisenberg group in normal coordinates (a, b, c).

    (a, b, c) stands for the upper unitriangular matrix with first row
    (1, a, c) and second row (0, 1, b); multiplication follows from the
    matrix product: (a,b,c)(a',b',c') = (a+a', b+b', c+c'+a*b').
    """

    kind = "heisenberg"

    def __init__(self):
        self.model_id = "heisenberg"
        self.generator_names = ("x", "X", "y", "Y")
        self._generator_values = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))

    def identity_value(self) -> tuple:
        return (0, 0, 0)

    def mul_values(self, u: tuple, v: tuple) -> tuple:
        return (u[0] + v[0], u[1] + v[1], u[2] + v[2] + u[0] * v[1])

    def inv_value(self, v: tuple) -> tuple:
        return (-v[0], -v[1], v[0] * v[1] - v[2])

    def label_of(self, value: tuple) -> str:
        return "(" + ",".join(str(a) for a in value) + ")"

    def polynomial_growth_degree(self) -> int | None:
        return 4


class LamplighterGroup(GroupModel):
    """Wreath product (Z/2) wr Z; values are (lit lamp positions, cursor).

    Generators: ``a`` toggles the lamp under the cursor (an involution) and
    ``t``/``T`` move the cursor.  (S,p)(T,q) = (S xor (p+T), p+q).
    """

    kind = "lamplighter"

    def __init__(self):
        self.model_id = "lamplighter"
        self.generator_names = ("a", "t", "T")
        self._generator_values = (((0,), 0), ((), 1), ((), -1))

    def identity_value(self) -> tuple:
        return ((), 0)

    def mul_values(self, u: tuple, v: tuple) -> tuple:
        lamps_u, p = u
        lamps_v, q = v
        if lamps_v:
            shifted = frozenset(s + p for s in lamps_v)
            lamps = frozenset(lamps_u).symmetric_difference(shifted)
            return (tuple(sorted(lamps)), p + q)
        return (lamps_u, p + q)

    def inv_value(self, v: tuple) -> tuple:
        lamps, p = v
        return (tuple(sorted(s - p for s in lamps)), -p)

    def label_of(self, value: tuple) -> str:
        lamps, p = value
        if not lamps and p == 0:
            return "e"
        body = "|".join(str(s) for s in lamps)
        return f"({{{body}}},{p})"

    def polynomial_growth_degree(self) -> int | None:
        return None


class BaumslagSolitarGroup(GroupModel):
    """BS(1, m) = <a, t | t a t^-1 = a^m> via affine maps x -> m^k x + b.

    ``a`` is translation by 1 and ``t`` is multiplication by m; b ranges
    over Z[1/m].  Values are (k, numerator, denominator) with b stored as a
    reduced fraction, which is a faithful normal form (equivalent to the
    2x2 matrix [[m^k, b], [0, 1]]).
    """

    kind = "bs"

    def __init__(self, m: int):
        if m < 1:
            raise UsageError("BS(1,m) needs m >= 1")
        self.m = m
        self.model_id = f"bs:1:{m}"
        self.generator_names = ("a", "A", "t", "T")
        self._generator_values = ((0, 1, 1), (0, -1, 1), (1, 0, 1), (-1, 0, 1))

    def identity_value(self) -> tuple:
        return (0, 0, 1)

    def mul_values(self, u: tuple, v: tuple) -> tuple:
        k1, n1, d1 = u
        k2, n2, d2 = v
        # b = m^k1 * b2 + b1
        if k1 >= 0:
            b = Fraction(self.m**k1 * n2, d2) + Fraction(n1, d1)
        else:
            b = Fraction(n2, d2 * self.m ** (-k1)) + Fraction(n1, d1)
        return (k1 + k2, b.numerator, b.denominator)

    def inv_value(self, v: tuple) -> tuple:
        k, n, d = v
        if k >= 0:
            b = Fraction(-n, d * self.m**k)
        else:
            b = Fraction(-n * self.m ** (-k), d)
        return (-k, b.numerator, b.denominator)

    def label_of(self, value: tuple) -> str:
        k, n, d = value
        if k == 0 and n == 0:
            return "e"
        frac = f"{n}" if d == 1 else f"{n}/{d}"
        return f"(t^{k},{frac})"

    def polynomial_growth_degree(self) -> int | None:
        if self.m == 1:
            return 2  # BS(1,1) is Z^2
        return None


class FiniteGroup(GroupModel):
    """Finite group given by a full multiplication table.

    The generating set is every non-identity element, which is symmetric
    and trivially generates.  Values are element indices into ``names``.
    """

    kind = "finite"

    def __init__(self, names: Sequence[str], table: Sequence[Sequence[str]], name: str | None = None):
        names = [str(s) for s in names]
        if len(set(names)) != len(names):
            raise UsageError("finite group element names must be distinct")
        self.names = tuple(names)
        pos = {s: i for i, s in enumerate(names)}
        n = len(names)
        if len(table) != n or any(len(row) != n for row in table):
            raise UsageError("multiplication table must be square and match the name list")
        try:
            self.table = tuple(tuple(pos[str(entry)] for entry in row) for row in table)
        except KeyError as exc:
            raise UsageError(f"table entry {exc.args[0]!r} is not an element name") from None
        ident = None
        for i in range(n):
            if all(self.table[i][j] == j and self.table[j][i] == j for j in range(n)):
                ident = i
                break
        if ident is None:
            raise UsageError("multiplication table has no identity element")
        self._identity = ident
        inverse = [None] * n
        for i in range(n):
            for j in range(n):
                if self.table[i][j] == ident and self.table[j][i] == ident:
                    inverse[i] = j
            if inverse[i] is None:
                raise UsageError(f"element {names[i]!r} has no inverse; not a group table")
        self._inverse = tuple(inverse)
        digest = hashlib.sha256(repr((self.names, self.table)).encode()).hexdigest()[:8]
        self.model_id = f"finite:{name or digest}"
        self.generator_names = tuple(s for i, s in enumerate(self.names) if i != ident)
        self._generator_values = tuple(i for i in range(n) if i != ident)

    @classmethod
    def from_csv(cls, path, name: str | None = None) -> "FiniteGroup":
        """Load a table whose first row and column carry the element names."""
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
        if len(rows) < 2:
            raise UsageError(f"{path}: not a multiplication table")
        names = [s.strip() for s in rows[0][1:]]
        table = []
        for row in rows[1:]:
            if len(row) != len(names) + 1:
                raise UsageError(f"{path}: ragged table row {row!r}")
            table.append([s.strip() for s in row[1:]])
        order = [s.strip() for s in (row[0] for row in rows[1:])]
        if order != names:
            raise UsageError(f"{path}: row and column name orders differ")
        return cls(names, table, name=name)

    @classmethod
    def cyclic(cls, n: int) -> "FiniteGroup":
        names = [f"g{i}" for i in range(n)]
        table = [[names[(i + j) % n] for j in range(n)] for i in range(n)]
        return cls(names, table, name=f"Z{n}")

    def identity_value(self) -> int:
        return self._identity

    def mul_values(self, u: int, v: int) -> int:
        return self.table[u][v]

    def inv_value(self, v: int) -> int:
        return self._inverse[v]

    def label_of(self, value: int) -> str:
        return self.names[value]

    def polynomial_growth_degree(self) -> int | None:
        return 0

    def _tokenize(self, word: str) -> list[str]:
        if any(len(s) > 1 for s in self.names):
            return word.replace("*", " ").split()
        return super()._tokenize(word)

    def _saturated(self, ball: "BallIndex") -> bool:
        return ball.size == len(self.names)


class DirectProductGroup(GroupModel):
    """Direct product of models; generators are the embedded factor generators."""

    kind = "product"

    def __init__(self, *factors: GroupModel):
        if len(factors) < 2:
            raise UsageError("direct product needs at least two factors")
        self.factors = tuple(factors)
        self.model_id = "product:" + "+".join(f.model_id for f in factors)
        names = []
        values = []
        idents = [f.identity_value() for f in factors]
        for fi, factor in enumerate(factors):
            for name, gv in zip(factor.generator_names, factor._generator_values):
                names.append(f"{name}{fi}")
                values.append(tuple(gv if i == fi else idents[i] for i in range(len(factors))))
        self.generator_names = tuple(names)
        self._generator_values = tuple(values)

    def identity_value(self) -> tuple:
        return tuple(f.identity_value() for f in self.factors)

    def mul_values(self, u: tuple, v: tuple) -> tuple:
        return tuple(f.mul_values(a, b) for f, a, b in zip(self.factors, u, v))

    def inv_value(self, v: tuple) -> tuple:
        return tuple(f.inv_value(a) for f, a in zip(self.factors, v))

    def label_of(self, value: tuple) -> str:
        return "(" + " , ".join(f.label_of(a) for f, a in zip(self.factors, value)) + ")"

    def key_of(self, value) -> bytes:
        return canonical_key(tuple(f.key_of(a) for f, a in zip(self.factors, value)))

    def polynomial_growth_degree(self) -> int | None:
        total = 0
        for f in self.factors:
            d = f.polynomial_growth_degree()
            if d is None:
                return None
            total += d
        return total

    def _tokenize(self, word: str) -> list[str]:
        return word.replace("*", " ").split()


def model_from_spec(spec: str) -> GroupModel:
    """Build a model from a CLI spec string.

    Formats: ``free:K``, ``abelian:D``, ``heisenberg``, ``lamplighter``,
    ``bs:1:M``, ``finite:PATH`` (CSV multiplication table).
    """
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    try:
        if head == "free":
            return FreeGroup(int(rest))
        if head == "abelian":
            return FreeAbelianGroup(int(rest))
        if head == "heisenberg" and not rest:
            return HeisenbergGroup()
        if head == "lamplighter" and not rest:
            return LamplighterGroup()
        if head == "bs":
            one, _, m = rest.partition(":")
            if int(one) != 1:
                raise UsageError("only BS(1,m) is supported")
            return BaumslagSolitarGroup(int(m))
        if head == "finite" and rest:
            return FiniteGroup.from_csv(rest)
    except ValueError:
        raise UsageError(f"malformed model spec {spec!r}") from None
    raise UsageError(f"unknown model spec {spec!r}")


# ---------------------------------------------------------------------------
# word balls
# ---------------------------------------------------------------------------


class BallIndex:
    """Indexed BFS enumeration of a word ball W_R.

    ``values[i]`` is the canonical value of element i in discovery order
    (layer by layer, each new sphere sorted by key bytes).  ``transitions``
    (optional) holds, for each element and declared generator, the index of
    the right product, or -1 when it falls outside the ball.
    """

    def __init__(self, model, radius, values, index, layer_starts, transitions=None):
        self.model = model
        self.radius = radius
        self.values = values
        self.index = index
        self.layer_starts = layer_starts
        self.transitions = transitions
        n = len(values)
        self.word_length = np.empty(n, dtype=np.int32)
        for r in range(radius + 1):
            self.word_length[layer_starts[r] : layer_starts[r + 1]] = r

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def sphere_sizes(self) -> list[int]:
        return [
            self.layer_starts[r + 1] - self.layer_starts[r] for r in range(self.radius + 1)
        ]

    def ball_size(self, r: int) -> int:
        return self.layer_starts[r + 1]

    def sphere_slice(self, r: int) -> slice:
        return slice(self.layer_starts[r], self.layer_starts[r + 1])

    def element(self, i: int) -> GroupElement:
        return self.model.wrap(self.values[i])

    def find(self, g: GroupElement) -> int | None:
        return self.index.get(g.value)

    @classmethod
    def build(
        cls,
        model: GroupModel,
        radius: int,
        budget: int = DEFAULT_ELEMENT_BUDGET,
        capture: bool = False,
        adaptive: bool = False,
    ) -> "BallIndex":
        """Enumerate W_radius by BFS.

        With ``adaptive=True`` the enumeration stops at the largest radius
        whose ball fits in ``budget`` instead of raising; otherwise a budget
        overrun raises :class:`ResourceBudgetError` with the last complete
        radius in ``partial``.
        """
        if radius < 0:
            raise UsageError("ball radius must be >= 0")
        mulv = model.mul_values
        key_of = model.key_of
        gen_values = model._generator_values
        n_gens = len(gen_values)

        e = model.identity_value()
        values: list = [e]
        index: dict = {e: 0}
        layer_starts = [0, 1]
        trans_rows: list[np.ndarray] = [] if capture else None

        achieved = 0
        for r in range(radius):
            lo, hi = layer_starts[r], layer_starts[r + 1]
            children: list = []  # flat, len (hi-lo)*n_gens
            fresh: list = []
            over_budget = False
            for i in range(lo, hi):
                u = values[i]
                for gv in gen_values:
                    w = mulv(u, gv)
                    children.append(w)
                    if w not in index:
                        index[w] = -1  # placeholder to dedupe within the layer
                        fresh.append(w)
                if adaptive and len(index) > budget:
                    over_budget = True
                    break
            if over_budget or len(values) + len(fresh) > budget:
                for w in fresh:
                    del index[w]
                if adaptive:
                    break
                raise ResourceBudgetError(
                    f"ball of {model.model_id} exceeds budget {budget} at radius {r + 1} "
                    f"(complete through radius {r})",
                    partial=r,
                )
            fresh.sort(key=key_of)
            base = len(values)
            for j, w in enumerate(fresh):
                index[w] = base + j
            values.extend(fresh)
            layer_starts.append(len(values))
            if capture:
                row = np.fromiter(
                    (index[w] for w in children), dtype=np.int32, count=len(children)
                )
                trans_rows.append(row.reshape(-1, n_gens))
            achieved = r + 1
            if len(fresh) == 0:
                # group exhausted before the requested radius
                layer_starts.extend([len(values)] * (radius - r - 1))
                achieved = radius
                break

        if capture:
            transitions = (
                np.concatenate(trans_rows, axis=0)
                if trans_rows
                else np.empty((0, n_gens), dtype=np.int32)
            )
            done = transitions.shape[0]
            if done < len(values):
                # rows for elements never expanded (outermost sphere, or a
                # budget-stopped layer), resolved against the final index
                extra = np.fromiter(
                    (
                        index.get(mulv(values[i], gv), -1)
                        for i in range(done, len(values))
                        for gv in gen_values
                    ),
                    dtype=np.int32,
                    count=(len(values) - done) * n_gens,
                ).reshape(-1, n_gens)
                transitions = np.concatenate([transitions, extra], axis=0)
        else:
            transitions = None
        return cls(model, achieved, values, index, layer_starts, transitions)


@dataclass(frozen=True)
class WordBall:
    """Enumerated word ball W_n with its sphere decomposition."""

    model: GroupModel
    radius: int
    elements: tuple[GroupElement, ...]  # BFS order
    sphere: tuple[GroupElement, ...]  # the outermost layer, word length == radius
    sphere_sizes: tuple[int, ...]  # |sphere_r| for r = 0..radius

    @property
    def size(self) -> int:
        return len(self.elements)

    @property
    def sphere_size(self) -> int:
        return len(self.sphere)

    def __contains__(self, g) -> bool:
        return g in self.element_set

    @property
    def element_set(self) -> frozenset:
        if not hasattr(self, "_element_set"):
            object.__setattr__(self, "_element_set", frozenset(self.elements))
        return self._element_set


def word_ball(model: GroupModel, n: int, budget: int = DEFAULT_ELEMENT_BUDGET) -> WordBall:
    """Exact enumeration of W_n with deterministic BFS order."""
    ball = BallIndex.build(model, n, budget=budget)
    return _ball_view(ball, n)


def word_balls(
    model: GroupModel, n: int, budget: int = DEFAULT_ELEMENT_BUDGET
) -> list[WordBall]:
    """W_0 .. W_n from a single enumeration (views share elements)."""
    ball = BallIndex.build(model, n, budget=budget)
    return [_ball_view(ball, r) for r in range(n + 1)]


def _ball_view(ball: BallIndex, r: int) -> WordBall:
    if not hasattr(ball, "_wrapped"):
        ball._wrapped = tuple(ball.model.wrap(v) for v in ball.values)
    elements = ball._wrapped[: ball.ball_size(r)]
    sphere = elements[ball.layer_starts[r] : ball.layer_starts[r + 1]]
    return WordBall(
        model=ball.model,
        radius=r,
        elements=elements,
        sphere=sphere,
        sphere_sizes=tuple(ball.sphere_sizes[: r + 1]),
    )


@dataclass(frozen=True)
class GrowthEstimate:
    """Word-growth summary: least-squares slope of ln|W_n| over the tail half."""

    rate: float
    radii: tuple[int, ...]
    raw: tuple[float, ...]  # (1/n) ln |W_n| per radius (0 at n=0)
    ball_sizes: tuple[int, ...]


def growth_rate(balls: Sequence[WordBall]) -> GrowthEstimate:
    """Fit the exponential growth rate from consecutive word balls.

    The rate is the least-squares slope of ln|W_n| against n over the tail
    half of the supplied radii; the raw sequence (1/n) ln|W_n| is returned
    alongside for inspection.
    """
    if len(balls) < 3:
        raise UsageError("growth_rate needs at least 3 consecutive radii")
    radii = [b.radius for b in balls]
    if any(radii[i + 1] - radii[i] != 1 for i in range(len(radii) - 1)):
        raise UsageError("growth_rate needs consecutive radii")
    sizes = [b.size for b in balls]
    logs = np.log(sizes)
    tail = len(balls) // 2
    xs = np.asarray(radii[tail:], dtype=float)
    ys = logs[tail:]
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(xs) > 1 else 0.0
    raw = tuple(0.0 if n == 0 else float(l) / n for n, l in zip(radii, logs))
    return GrowthEstimate(rate=slope, radii=tuple(radii), raw=raw, ball_sizes=tuple(sizes))


def word_lengths(
    model: GroupModel,
    elements: Iterable[GroupElement],
    max_radius: int = 64,
    budget: int = DEFAULT_ELEMENT_BUDGET,
) -> dict[GroupElement, int]:
    """Word length of each element, by BFS out to the first radius covering all."""
    wanted = {g.value: g for g in elements}
    if not wanted:
        return {}
    radius = 1
    while True:
        radius = min(radius, max_radius)
        ball = BallIndex.build(model, radius, budget=budget, adaptive=True)
        if all(v in ball.index for v in wanted):
            return {
                g: int(ball.word_length[ball.index[v]]) for v, g in wanted.items()
            }
        saturated = ball.sphere_sizes[-1] == 0 or ball.radius < radius
        if radius >= max_radius or saturated:
            missing = ", ".join(
                model.label_of(v) for v in list(wanted)[:5] if v not in ball.index
            )
            raise UsageError(
                f"elements not found within word radius {radius} of {model.model_id}: {missing}"
            )
        radius *= 2
