"""Exact exit measures for simple random walk on finite lattice domains.

Exit kernels are computed by direct linear solves of the discrete Dirichlet
problem (one factorization per domain, all boundary basis vectors at once),
so identities like the strong Markov property, harmonic extension, and
nested-domain monotonicity can be checked to machine precision.  A
counter-based Monte Carlo sampler cross-validates rows pathwise.

Domains may wrap an axis (cylinder topology); the tiled-strip builders use
this to model a Z-stack of fundamental tiles whose only boundary is the two
end faces, which reproduces the gambler's-ruin 1/n law along the stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import NumericError, UsageError

Point = tuple[int, ...]


def _normalize_point(p, dim: int) -> Point:
    if isinstance(p, int):
        p = (p,)
    p = tuple(int(c) for c in p)
    if len(p) != dim:
        raise UsageError(f"point {p} has dimension {len(p)}, domain has {dim}")
    return p


@dataclass(frozen=True)
class GridDomain:
    """Finite set of lattice cells split into interior and boundary.

    ``wrap[i]`` makes axis i periodic with period ``periods[i]``; wrapped
    coordinates are stored reduced mod the period.  Interior cells are those
    whose 2*dim lattice neighbours all belong to the domain.
    """

    dim: int
    cells: frozenset[Point]
    interior: tuple[Point, ...]
    boundary: tuple[Point, ...]
    faces: Mapping[str, frozenset[Point]] | None = None
    wrap: tuple[bool, ...] = ()
    periods: tuple[int | None, ...] = ()
    tile_step: Point | None = None  # set by tiled builders
    tile_count: int | None = None

    def neighbors(self, p: Point) -> list[Point]:
        out = []
        for axis in range(self.dim):
            for d in (1, -1):
                q = list(p)
                q[axis] += d
                if self.wrap and self.wrap[axis]:
                    q[axis] %= self.periods[axis]
                out.append(tuple(q))
        return out

    def reduce(self, p) -> Point:
        p = _normalize_point(p, self.dim)
        if not self.wrap or not any(self.wrap):
            return p
        return tuple(
            c % self.periods[i] if self.wrap[i] else c for i, c in enumerate(p)
        )

    @property
    def interior_set(self) -> frozenset:
        if not hasattr(self, "_interior_set"):
            object.__setattr__(self, "_interior_set", frozenset(self.interior))
        return self._interior_set

    def center(self) -> Point:
        """Componentwise floor midpoint of the interior bounding box."""
        lo = [min(p[i] for p in self.interior) for i in range(self.dim)]
        hi = [max(p[i] for p in self.interior) for i in range(self.dim)]
        return tuple((a + b) // 2 for a, b in zip(lo, hi))


def _make_domain(
    cells: Iterable[Point],
    dim: int,
    faces=None,
    wrap=None,
    periods=None,
    tile_step=None,
    tile_count=None,
) -> GridDomain:
    wrap = tuple(wrap) if wrap else (False,) * dim
    periods = tuple(periods) if periods else (None,) * dim
    cellset = frozenset(cells)
    bounce = GridDomain(
        dim=dim,
        cells=cellset,
        interior=(),
        boundary=(),
        wrap=wrap,
        periods=periods,
    )
    interior = []
    boundary = []
    for p in sorted(cellset):
        if all(q in cellset for q in bounce.neighbors(p)):
            interior.append(p)
        else:
            boundary.append(p)
    if not interior:
        raise UsageError("domain has empty interior")
    if faces is not None:
        faces = {str(k): frozenset(v) for k, v in faces.items()}
        stray = set().union(*faces.values()) - set(boundary)
        if stray:
            raise UsageError(f"face points not on the boundary: {sorted(stray)[:4]}")
    return GridDomain(
        dim=dim,
        cells=cellset,
        interior=tuple(interior),
        boundary=tuple(boundary),
        faces=faces,
        wrap=wrap,
        periods=periods,
        tile_step=tile_step,
        tile_count=tile_count,
    )


def interval(n: int) -> GridDomain:
    """Path domain {0..n}; interior {1..n-1}, boundary {0, n}."""
    if n < 2:
        raise UsageError("interval needs n >= 2")
    return _make_domain([(i,) for i in range(n + 1)], dim=1)


def rectangle(w: int, h: int) -> GridDomain:
    """Grid {0..w} x {0..h} with (w-1)(h-1) interior cells."""
    if w < 2 or h < 2:
        raise UsageError("rectangle needs w, h >= 2")
    return _make_domain(
        [(x, y) for x in range(w + 1) for y in range(h + 1)], dim=2
    )


def box(lo, hi) -> GridDomain:
    """Axis-aligned box of cells with corners lo and hi inclusive."""
    lo = tuple(int(c) for c in (lo if isinstance(lo, (tuple, list)) else (lo,)))
    hi = tuple(int(c) for c in (hi if isinstance(hi, (tuple, list)) else (hi,)))
    if len(lo) != len(hi) or len(lo) not in (1, 2):
        raise UsageError("box corners must share dimension 1 or 2")
    if any(b - a < 2 for a, b in zip(lo, hi)):
        raise UsageError("box needs side length >= 2 for a nonempty interior")
    if len(lo) == 1:
        cells = [(x,) for x in range(lo[0], hi[0] + 1)]
    else:
        cells = [
            (x, y)
            for x in range(lo[0], hi[0] + 1)
            for y in range(lo[1], hi[1] + 1)
        ]
    return _make_domain(cells, dim=len(lo))


def square_tile(span: int = 2) -> GridDomain:
    """Single square tile with its four sides labelled as faces.

    Corners belong to no side (they are lower-dimensional faces); for any
    span they carry no exit mass reachable claims, and side masses stay
    comparable by symmetry.
    """
    if span < 2:
        raise UsageError("square tile span must be >= 2")
    cells = [(x, y) for x in range(span + 1) for y in range(span + 1)]
    rng = range(1, span)
    faces = {
        "left": {(0, y) for y in rng},
        "right": {(span, y) for y in rng},
        "bottom": {(x, 0) for x in rng},
        "top": {(x, span) for x in rng},
    }
    return _make_domain(cells, dim=2, faces=faces)


def strip_of_tiles(
    n_tiles: int, span: int = 2, height: int | None = None, wrap: bool = True
) -> GridDomain:
    """Union of ``n_tiles`` translates of a tile along the x axis.

    With ``height`` set and ``wrap=True`` the transverse axis is periodic
    (a lattice cylinder): the only boundary is the two end rings, the
    x-coordinate performs a clean gambler's ruin, and each tile's face is
    the part of the boundary it contains.  ``wrap=False`` keeps the top and
    bottom rows as absorbing boundary, giving every tile a nonempty face;
    interface points x = i*span then belong to two adjacent tiles (the
    bounded-overlap constant of a tiling).
    """
    if n_tiles < 1 or span < 1:
        raise UsageError("strip needs n_tiles >= 1 and span >= 1")
    length = n_tiles * span
    if height is None:
        if length < 2:
            raise UsageError("1d strip too short")
        cells = [(x,) for x in range(length + 1)]
        dom = _make_domain(cells, dim=1, tile_step=(span,), tile_count=n_tiles)
        faces = {}
        for i in range(n_tiles):
            pts = {
                p for p in dom.boundary if i * span <= p[0] <= (i + 1) * span
            }
            if pts:
                faces[f"tile{i}"] = pts
        return _make_domain(
            cells, dim=1, faces=faces, tile_step=(span,), tile_count=n_tiles
        )
    if wrap:
        if height < 1:
            raise UsageError("cylinder height must be >= 1")
        cells = [(x, y) for x in range(length + 1) for y in range(height)]
        wrap_spec = (False, True)
        periods = (None, height)
    else:
        if height < 2:
            raise UsageError("open strip height must be >= 2")
        cells = [(x, y) for x in range(length + 1) for y in range(height + 1)]
        wrap_spec = (False, False)
        periods = (None, None)
    dom = _make_domain(
        cells, dim=2, wrap=wrap_spec, periods=periods,
        tile_step=(span, 0), tile_count=n_tiles,
    )
    faces = {}
    for i in range(n_tiles):
        pts = {p for p in dom.boundary if i * span <= p[0] <= (i + 1) * span}
        if pts:
            faces[f"tile{i}"] = pts
    return _make_domain(
        cells, dim=2, faces=faces, wrap=wrap_spec, periods=periods,
        tile_step=(span, 0), tile_count=n_tiles,
    )


def from_mask(text: str) -> GridDomain:
    """Domain from a text grid: ``#`` is a cell, ``.`` is a hole.

    Row i, column j becomes the point (j, i); a single row gives a
    one-dimensional domain.
    """
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise UsageError("empty mask")
    cells = []
    for i, line in enumerate(rows):
        for j, ch in enumerate(line):
            if ch == "#":
                cells.append((j, i))
            elif ch not in ". ":
                raise UsageError(f"mask char {ch!r} at row {i} col {j}")
    if len(rows) == 1:
        return _make_domain([(x,) for x, _ in cells], dim=1)
    return _make_domain(cells, dim=2)


def build_domain(spec: str) -> GridDomain:
    """Domain from a CLI spec string.

    Formats: ``interval:N``, ``rectangle:W:H``, ``square:S``,
    ``strip:TILES:SPAN[:HEIGHT[:open]]`` and ``mask:PATH``.
    """
    parts = spec.strip().split(":")
    head = parts[0]
    try:
        if head == "interval" and len(parts) == 2:
            return interval(int(parts[1]))
        if head == "rectangle" and len(parts) == 3:
            return rectangle(int(parts[1]), int(parts[2]))
        if head == "square" and len(parts) == 2:
            return square_tile(int(parts[1]))
        if head == "strip" and len(parts) in (3, 4, 5):
            tiles, span = int(parts[1]), int(parts[2])
            height = int(parts[3]) if len(parts) >= 4 else None
            wrap = not (len(parts) == 5 and parts[4] == "open")
            return strip_of_tiles(tiles, span, height, wrap=wrap)
        if head == "mask" and len(parts) >= 2:
            path = ":".join(parts[1:])
            with open(path) as fh:
                return from_mask(fh.read())
    except ValueError:
        raise UsageError(f"malformed domain spec {spec!r}") from None
    except OSError as exc:
        raise UsageError(f"cannot read mask {spec!r}: {exc}") from None
    raise UsageError(f"unknown domain spec {spec!r}")


class ExitKernel:
    """Exact exit-probability rows for every interior point of a domain.

    Row x solves the discrete Dirichlet problem with delta boundary data:
    entry (x, b) is the probability that simple random walk from x first
    hits the boundary at b.  Rows are probability vectors to solver
    precision.
    """

    def __init__(self, domain: GridDomain):
        self.domain = domain
        self.boundary = domain.boundary
        interior = domain.interior
        n, m = len(interior), len(self.boundary)
        int_pos = {p: i for i, p in enumerate(interior)}
        bdry_pos = {p: j for j, p in enumerate(self.boundary)}
        A = np.eye(n)
        B = np.zeros((n, m))
        step = 1.0 / (2 * domain.dim)
        for i, p in enumerate(interior):
            for q in domain.neighbors(p):
                j = int_pos.get(q)
                if j is not None:
                    A[i, j] -= step
                else:
                    B[i, bdry_pos[q]] += step
        try:
            self.matrix = np.linalg.solve(A, B)
        except np.linalg.LinAlgError as exc:  # unreachable for connected interiors
            raise NumericError(f"singular Dirichlet system: {exc}") from exc
        self._int_pos = int_pos
        self._bdry_pos = bdry_pos

    def row(self, x) -> np.ndarray:
        """Exit distribution from interior point x over ``self.boundary``."""
        p = self.domain.reduce(x)
        i = self._int_pos.get(p)
        if i is None:
            raise UsageError(f"{p} is not an interior point")
        return self.matrix[i]

    def row_or_delta(self, z) -> np.ndarray:
        """Row for interior z; a delta vector when z is already on the boundary."""
        p = self.domain.reduce(z)
        j = self._bdry_pos.get(p)
        if j is not None:
            out = np.zeros(len(self.boundary))
            out[j] = 1.0
            return out
        return self.row(p)

    def mass(self, x, b) -> float:
        p = self.domain.reduce(b)
        j = self._bdry_pos.get(p)
        if j is None:
            raise UsageError(f"{p} is not a boundary point")
        return float(self.row(x)[j])

    @property
    def rows(self) -> dict[Point, np.ndarray]:
        return {p: self.matrix[i] for p, i in self._int_pos.items()}


def exit_kernel(domain: GridDomain) -> ExitKernel:
    return ExitKernel(domain)


def harmonic_extension(domain: GridDomain, f_boundary: Mapping) -> dict[Point, float]:
    """Interior values of the harmonic extension of boundary data.

    f(x) = sum_b eps_x(b) f(b); the result satisfies the discrete mean-value
    property at every interior point to solver precision.
    """
    data = {domain.reduce(p): float(v) for p, v in f_boundary.items()}
    missing = [b for b in domain.boundary if b not in data]
    if missing:
        raise UsageError(
            f"boundary data missing at {len(missing)} points, first {missing[0]}"
        )
    kernel = ExitKernel(domain)
    fvec = np.array([data[b] for b in kernel.boundary])
    values = kernel.matrix @ fvec
    return {p: float(values[i]) for p, i in kernel._int_pos.items()}


def _require_nested(d1: GridDomain, d2: GridDomain) -> None:
    if d1.dim != d2.dim or d1.wrap != d2.wrap or d1.periods != d2.periods:
        raise UsageError("nested domains must share dimension and wrapping")
    if not d1.cells <= d2.cells:
        raise UsageError("first domain is not contained in the second")


def smp_check(d1: GridDomain, d2: GridDomain, x, k1: ExitKernel | None = None, k2: ExitKernel | None = None) -> float:
    """Strong-Markov residual for nested domains.

    Compares the direct exit row from x in the large domain against the
    two-stage route through the small domain's boundary; per-point
    comparison suffices by linearity.  Exact solves keep this at float
    roundoff.
    """
    _require_nested(d1, d2)
    k1 = k1 or ExitKernel(d1)
    k2 = k2 or ExitKernel(d2)
    x = d1.reduce(x)
    direct = k2.row_or_delta(x)
    composed = np.zeros_like(direct)
    row1 = k1.row(x)  # x must be interior to the small domain
    for z, w in zip(k1.boundary, row1):
        if w != 0.0:
            composed += w * k2.row_or_delta(z)
    return float(np.max(np.abs(direct - composed)))


@dataclass(frozen=True)
class EpsRatio:
    """max_b |eps_x(b)/eps_y(b) - 1| with its witness and Harnack bracket."""

    value: float
    witness: Point
    harnack_low: float
    harnack_high: float
    restricted: bool  # some boundary mass fell outside the common support


def eps_ratio(domain: GridDomain, x, y, kernel: ExitKernel | None = None) -> EpsRatio:
    """Pointwise comparison of two exit rows from the same domain."""
    kernel = kernel or ExitKernel(domain)
    rx = kernel.row(x)
    ry = kernel.row(y)
    best = -1.0
    witness = None
    lo, hi = math.inf, -math.inf
    restricted = False
    for b, px, py in zip(kernel.boundary, rx, ry):
        if py <= 0.0:
            if px > 0.0:
                restricted = True
            continue
        if px <= 0.0:
            restricted = True
        ratio = float(px) / float(py)
        lo = min(lo, ratio)
        hi = max(hi, ratio)
        gap = abs(ratio - 1.0)
        if gap > best:
            best = gap
            witness = b
    if witness is None:
        raise UsageError("exit rows share no support; domain interior disconnected?")
    return EpsRatio(
        value=best, witness=witness, harnack_low=lo, harnack_high=hi, restricted=restricted
    )


def nested_monotonicity(d1: GridDomain, d2: GridDomain, x, y, tol: float = 1e-10) -> bool:
    """Exit-ratio deviation does not grow when the domain grows."""
    _require_nested(d1, d2)
    inner = eps_ratio(d1, x, y)
    outer = eps_ratio(d2, x, y)
    return outer.value <= inner.value + tol


@dataclass(frozen=True)
class SideMasses:
    """Per-face exit masses, with the stack decomposition when tiled."""

    per_face: dict[str, float]
    min_mass: float
    overlap: int  # max number of faces sharing one boundary point
    factors: tuple[float, ...] | None  # ratio factors along the tile geodesic
    factors_target: str | None
    factors_residual: float | None  # gap of the telescoped product, ~0 by construction


def side_masses(domain: GridDomain, x, kernel: ExitKernel | None = None) -> SideMasses:
    """Exit mass of each labelled face from interior point x.

    For a tiled strip the mass of the far tile's face is also decomposed as
    a product of consecutive-basepoint ratios along the tile geodesic
    starting at x, mirroring how covering arguments push an exit bound from
    tile to tile.
    """
    if domain.faces is None:
        raise UsageError("domain has no labelled faces")
    kernel = kernel or ExitKernel(domain)
    row = kernel.row(x)
    bpos = {b: j for j, b in enumerate(kernel.boundary)}
    per_face = {}
    for label in sorted(domain.faces):
        pts = domain.faces[label]
        per_face[label] = float(sum(row[bpos[b]] for b in pts))
    counts: dict[Point, int] = {}
    for pts in domain.faces.values():
        for b in pts:
            counts[b] = counts.get(b, 0) + 1
    overlap = max(counts.values(), default=0)

    factors = None
    target = None
    residual = None
    if domain.tile_step is not None and domain.tile_count and domain.tile_count > 1:
        target = f"tile{domain.tile_count - 1}"
        if target in per_face and per_face[target] > 0:
            x0 = domain.reduce(x)
            step = domain.tile_step
            tile_of_x = min(
                max(x0[0] // step[0], 0) if step[0] else 0, domain.tile_count - 1
            )
            hops = domain.tile_count - 1 - tile_of_x
            pts = domain.faces[target]
            def face_mass(p):
                r = kernel.row(p)
                return float(sum(r[bpos[b]] for b in pts))
            points = []
            for i in range(hops + 1):
                p = tuple(c + i * s for c, s in zip(x0, step))
                if domain.reduce(p) not in kernel._int_pos:
                    break
                points.append(domain.reduce(p))
            if len(points) >= 2:
                masses = [face_mass(p) for p in points]
                if all(m > 0 for m in masses):
                    factors = tuple(
                        masses[i] / masses[i + 1] for i in range(len(masses) - 1)
                    )
                    prod = masses[-1]
                    for f in factors:
                        prod *= f
                    residual = abs(prod - masses[0])
    return SideMasses(
        per_face=per_face,
        min_mass=min(per_face.values()) if per_face else 0.0,
        overlap=overlap,
        factors=factors,
        factors_target=target,
        factors_residual=residual,
    )


@dataclass(frozen=True)
class SamplerResult:
    """Empirical exit distribution with its distance to the exact kernel."""

    counts: dict[Point, int]
    paths: int
    tv_distance: float
    seed: int


def mc_exit_sampler(
    domain: GridDomain, x, seed: int, paths: int, kernel: ExitKernel | None = None
) -> SamplerResult:
    """Sample simple-random-walk exits and compare with the exact row.

    Each path gets its own counter-based stream keyed by (seed, path index),
    so the result is identical for any execution order or thread count.
    """
    if paths < 1:
        raise UsageError("need at least one sample path")
    x = domain.reduce(x)
    if x not in domain.interior_set:
        raise UsageError(f"{x} is not an interior point")
    kernel = kernel or ExitKernel(domain)
    interior = domain.interior_set
    dim = domain.dim
    offsets = []
    for axis in range(dim):
        for d in (1, -1):
            off = [0] * dim
            off[axis] = d
            offsets.append(tuple(off))
    wrap = domain.wrap
    periods = domain.periods
    counts: dict[Point, int] = {}
    chunk = 64
    for path in range(paths):
        rng = np.random.Generator(np.random.Philox(key=[seed, path]))
        p = x
        buf = ()
        pos = 0
        while p in interior:
            if pos == len(buf):
                buf = rng.integers(0, 2 * dim, size=chunk)
                pos = 0
            off = offsets[buf[pos]]
            pos += 1
            q = tuple(a + b for a, b in zip(p, off))
            if any(wrap):
                q = tuple(
                    c % periods[i] if wrap[i] else c for i, c in enumerate(q)
                )
            p = q
        counts[p] = counts.get(p, 0) + 1
    exact = kernel.row(x)
    tv = 0.0
    for b, mass in zip(kernel.boundary, exact):
        emp = counts.get(b, 0) / paths
        tv += abs(emp - mass)
    stray = sum(n for b, n in counts.items() if b not in kernel._bdry_pos)
    tv += stray / paths
    return SamplerResult(counts=counts, paths=paths, tv_distance=0.5 * tv, seed=seed)
