"""
Fixed points, the commuting invariant set, linearizations, and the three-way classification.

`classify` places a near-identity nilpotent pseudogroup in one of three cases:

1. the generators have common fixed points; on every complementary interval they act through
   translations t -> t + a_i after the semi-conjugacy phi;
2. no common fixed point and some relative translation number is irrational; the generators act through
   t -> t + a_i on an interval J of the line;
3. all relative translation numbers are rational; a finite chain y_k with f_i(y_k) = y_(k + a_i) for
   integers a_i crosses (-1, 1).
"""
import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, TypeAdapter
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq, minimize_scalar
from sympy.core.intfunc import igcdex
from typing_extensions import Callable, Dict, Iterator, List, Literal, NamedTuple, Optional, Sequence, Tuple, Union

from ._consts import report_schema_version
from ._parallel import thread_map
from ._registry import KindAdapter, KindModel
from .errors import AmbiguousResolution, ChainInconsistent, EmptyDomain, FixedPointInput, HypothesisFailure, NotInRange, OutOfDomain, RationalityMismatch, ResolutionFailure
from .nilpotency import IDENTITY_SAMPLES, IDENTITY_TOL, NilpotencyReport, enumerate_commutators, verify_abelian, verify_metabelian, verify_near_identity_nilpotent
from .pmap import UNIT, GeneratorSet, Interval, Word, commutator, eval_word, eval_word_derivative, eval_word_grid, word_domain
from .rotation import N_ITERS, Q_MAX, RotationEstimate, rational_identify, relative_translation_number

logger = logging.getLogger(__name__)

FIXED_TOL = 1e-10
GRID = 2001
CHAIN_GRID = 257
SEGMENTS = 32
MAX_SEGMENTS = 400
CHAIN_TOL = 1e-9
MAX_CHAIN = 100_000
DIVERGENCE_STEPS = 1000
RESIDUAL_SAMPLES = 1000


# ---------------------------------------------------------------- fixed points

@dataclass(frozen=True)
class FixedPointSet:
    """Isolated fixed points plus plateaus, closed intervals of fixed points given by their ends."""
    points: Tuple[float, ...] = ()
    plateaus: Tuple[Interval, ...] = ()
    tol: float = FIXED_TOL
    source_word: Optional[Word] = None

    @property
    def empty(self) -> bool:
        return not self.points and not self.plateaus

    def contains(self, x: float, slack: float|None = None) -> bool:
        slack = 2 * self.tol if slack is None else slack
        return any(abs(p - x) <= slack for p in self.points) or any(p.lo - slack <= x <= p.hi + slack for p in self.plateaus)

    def closures(self) -> List[Tuple[float, float]]:
        return sorted([(p, p) for p in self.points] + [(p.lo, p.hi) for p in self.plateaus])

    def nearest(self, x: float) -> Optional[float]:
        best = None
        for lo, hi in self.closures():
            candidate = min(max(x, lo), hi)
            if best is None or abs(candidate - x) < abs(best - x):
                best = candidate
        return best

    def intersect(self, other: "FixedPointSet") -> "FixedPointSet":
        tol = max(self.tol, other.tol)
        points = [p for p in self.points if other.contains(p)] + [p for p in other.points if self.contains(p)]
        plateaus = []
        for first in self.plateaus:
            for second in other.plateaus:
                lo, hi = max(first.lo, second.lo), min(first.hi, second.hi)
                if hi - lo > 2 * tol:
                    plateaus.append(Interval(lo, hi))
                elif hi >= lo - 2 * tol:
                    points.append(0.5 * (lo + hi))
        plateaus.sort(key=lambda p: p.lo)
        return FixedPointSet(_dedupe(points, tol, plateaus), tuple(plateaus), tol)


def _dedupe(points: Sequence[float], tol: float, plateaus: Sequence[Interval]) -> Tuple[float, ...]:
    kept: List[float] = []
    for p in sorted(points):
        if kept and p - kept[-1] <= 2 * tol:
            continue
        if any(plateau.lo - 2 * tol <= p <= plateau.hi + 2 * tol for plateau in plateaus):
            continue
        kept.append(p)
    return tuple(kept)


def _runs(mask: np.ndarray) -> Iterator[Tuple[int, int]]:
    """(start, stop) of every maximal run of True values."""
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return zip(edges[::2].tolist(), edges[1::2].tolist())


def _bisect_edge(predicate: Callable[[float], bool], outside: float, inside: float, tol: float) -> float:
    while abs(inside - outside) > tol:
        middle = 0.5 * (inside + outside)
        if predicate(middle):
            inside = middle
        else:
            outside = middle
    return inside


def fixed_points(gens: GeneratorSet, w: Word, interval: Interval|None = None, tol: float = FIXED_TOL, grid: int = GRID) -> FixedPointSet:
    """
    Zeros of d(x) = w(x) - x on a grid of `interval` (clipped to the domain of `w`): sign changes and
    tangential zeros are refined to `tol`, runs of |d| < tol become plateaus.
    """
    domain = word_domain(gens, w)
    interval = domain if interval is None else interval.intersect(domain)
    if interval.empty:
        raise EmptyDomain(f"{gens.format(w)} has no domain to search for fixed points in")
    if w.is_identity:
        return FixedPointSet(plateaus=(interval,), tol=tol, source_word=w)

    def gap(x: float) -> float:
        return eval_word(gens, w, x) - x

    def flat(x: float) -> bool:
        try:
            return abs(gap(x)) < tol
        except OutOfDomain:
            return False

    xs = interval.grid(grid)
    d = eval_word_grid(gens, w, xs) - xs
    defined = ~np.isnan(d)
    near = defined & (np.abs(np.where(defined, d, np.inf)) < tol)
    points: List[float] = []
    plateaus: List[Interval] = []

    for start, stop in _runs(near):
        if stop - start >= 2:
            lo = interval.lo if start == 0 else _bisect_edge(flat, xs[start - 1], xs[start], tol)
            hi = interval.hi if stop == len(xs) else _bisect_edge(flat, xs[stop], xs[stop - 1], tol)
            plateaus.append(Interval(float(lo), float(hi)))
            continue
        i = start
        if 0 < i < len(xs) - 1 and defined[i - 1] and defined[i + 1] and d[i - 1] * d[i + 1] < 0:
            points.append(brentq(gap, xs[i - 1], xs[i + 1], xtol=tol / 4))
        else:
            points.append(float(xs[i]))

    usable = defined & ~near
    for i in np.flatnonzero(usable[:-1] & usable[1:] & (d[:-1] * np.where(usable[1:], d[1:], 0) < 0)):
        points.append(brentq(gap, xs[i], xs[i + 1], xtol=tol / 4))

    # zeros touched without a sign change show up as small local minima of |d|
    magnitude = np.abs(d)
    screen = math.sqrt(tol)
    for i in range(1, len(xs) - 1):
        if not (usable[i - 1] and usable[i] and usable[i + 1]) or magnitude[i] >= screen:
            continue
        if magnitude[i] <= magnitude[i - 1] and magnitude[i] <= magnitude[i + 1] and d[i - 1] * d[i] > 0 and d[i] * d[i + 1] > 0:
            result = minimize_scalar(lambda x: abs(gap(x)), bounds=(xs[i - 1], xs[i + 1]), method="bounded", options={"xatol": tol / 4})
            if abs(gap(result.x)) < tol:
                points.append(float(result.x))

    found = FixedPointSet(_dedupe(points, tol, plateaus), tuple(plateaus), tol, w)
    logger.debug("fixed points of %s: %d points, %d plateaus", gens.format(w), len(found.points), len(found.plateaus))
    return found


def _fixed_by_all(gens: GeneratorSet, x: float, tol: float) -> bool:
    try:
        return all(abs(eval_word(gens, Word.generator(i), x) - x) < tol for i in range(len(gens)))
    except OutOfDomain:
        return False


def _refine_tangential(gens: GeneratorSet, cluster: Sequence[float], tol: float) -> float:
    """Zero of some w' - 1 near a cluster of tangential fixed points, else the cluster mean."""
    middle = float(np.mean(cluster))
    if cluster[-1] - cluster[0] <= 2 * tol:
        return middle
    reach = 2 * (cluster[-1] - cluster[0]) + math.sqrt(tol)
    lo, hi = max(middle - reach, UNIT.lo + tol), min(middle + reach, UNIT.hi - tol)
    for i in range(len(gens)):
        w = Word.generator(i)

        def slope_gap(x: float) -> float:
            return eval_word_derivative(gens, w, x)[1] - 1

        try:
            if slope_gap(lo) * slope_gap(hi) >= 0:
                continue
            root = brentq(slope_gap, lo, hi, xtol=tol / 4)
        except OutOfDomain:
            continue
        if _fixed_by_all(gens, root, tol):
            return float(root)
    return middle


def common_fixed_points(gens: GeneratorSet, tol: float = FIXED_TOL, grid: int = GRID) -> FixedPointSet:
    sets = thread_map(lambda i: fixed_points(gens, Word.generator(i), UNIT, tol, grid), range(len(gens)))
    common = reduce(FixedPointSet.intersect, sets)

    # tangential zeros are only located to about sqrt(tol), so per-generator points are checked directly
    candidates = sorted(set(common.points).union(p for s in sets for p in s.points if _fixed_by_all(gens, p, tol)))
    clusters: List[List[float]] = []
    for p in candidates:
        if clusters and _fixed_by_all(gens, 0.5 * (clusters[-1][-1] + p), tol):
            clusters[-1].append(p)
        else:
            clusters.append([p])
    points = [_refine_tangential(gens, cluster, tol) for cluster in clusters]
    common = FixedPointSet(_dedupe(points, tol, common.plateaus), common.plateaus, tol)

    logger.info("common fixed points: %s", list(common.points) + [str(p) for p in common.plateaus] or "none")
    return common


def complementary_intervals(fixed: FixedPointSet, domain: Interval = UNIT) -> List[Interval]:
    """Maximal open intervals of `domain` avoiding the points and plateau closures of `fixed`."""
    intervals = []
    edge = domain.lo
    for lo, hi in fixed.closures():
        if lo > edge:
            intervals.append(Interval(edge, lo))
        edge = max(edge, hi)
    if edge < domain.hi:
        intervals.append(Interval(edge, domain.hi))
    return intervals


# ---------------------------------------------------------------- invariant set

@dataclass(frozen=True, eq=False)
class InvariantSetApprox:
    """
    Grid approximation of a closed set invariant under the generators on which every [f_i, f_j] is the
    identity. `members` are the surviving grid points, `intervals` their runs padded by half a cell.
    """
    resolution: float
    intervals: Tuple[Interval, ...]
    tol: float
    members: np.ndarray = field(repr=False)

    def contains(self, x: float) -> bool:
        return any(interval.lo <= x <= interval.hi for interval in self.intervals)

    def nearest(self, x: float, within: Interval|None = None) -> Optional[float]:
        members = self.members
        if within is not None:
            members = members[(members > within.lo) & (members < within.hi)]
        if not len(members):
            return None
        return float(members[np.argmin(np.abs(members - x))])

    def covers_neighbourhood(self, x: float) -> bool:
        return any(interval.lo < x - self.resolution and x + self.resolution < interval.hi for interval in self.intervals)


def invariant_commuting_set(gens: GeneratorSet, tol: float = IDENTITY_TOL, grid: int = GRID) -> InvariantSetApprox:
    """
    Start from the grid points where every order-1 commutator defined there moves less than `tol`, then
    drop points with a generator image (or inverse image) inside (-1, 1) but more than one cell away
    from every remaining point, until nothing changes.
    """
    if grid % 2 == 0:
        grid += 1  # keeps 0 on the grid
    xs = UNIT.grid(grid)
    cell = float(xs[1] - xs[0])
    member = np.ones(len(xs), dtype=bool)
    for tree in enumerate_commutators(gens, 1):
        deviation = np.abs(eval_word_grid(gens, tree.word, xs) - xs)
        member &= ~(deviation >= tol)

    images = []
    for i in range(len(gens)):
        for sign in (1, -1):
            values = eval_word_grid(gens, Word.generator(i, sign), xs)
            inside = np.isfinite(values) & (values > -1) & (values < 1)
            safe = np.where(inside, values, 0.0)
            images.append((inside, np.searchsorted(xs, safe - cell, "left"), np.searchsorted(xs, safe + cell, "right")))

    for _ in range(len(xs)):
        counts = np.concatenate(([0], np.cumsum(member)))
        keep = member.copy()
        for inside, lo, hi in images:
            keep &= ~inside | (counts[hi] - counts[lo] > 0)
        if np.array_equal(keep, member):
            break
        member = keep

    if not member.any():
        raise ResolutionFailure(f"no grid point of resolution {cell:.3g} survives; refine the grid or loosen tol={tol!r}")
    intervals = []
    for start, stop in _runs(member):
        lo = -1.0 if start == 0 else max(-1.0, float(xs[start]) - cell / 2)
        hi = 1.0 if stop == len(xs) else min(1.0, float(xs[stop - 1]) + cell / 2)
        intervals.append(Interval(lo, hi))
    logger.info("invariant commuting set: %d of %d grid points in %d intervals", int(member.sum()), len(xs), len(intervals))
    return InvariantSetApprox(cell, tuple(intervals), tol, xs[member])


# ---------------------------------------------------------------- sampled maps

class SampledMonotoneMap:
    """
    An increasing map known at nodes. Between nodes it is a cubic Hermite interpolant through the given
    slopes, or PCHIP when no slopes are given; outside the nodes it is NaN.
    """

    def __init__(self, t: Sequence[float], values: Sequence[float], slopes: Optional[Sequence[float]] = None):
        self.t = np.asarray(t, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.slopes = None if slopes is None else np.asarray(slopes, dtype=float)
        if len(self.t) < 2 or len(self.t) != len(self.values):
            raise ValueError(f"Need at least two matching nodes, got {len(self.t)} and {len(self.values)}")
        if not (np.all(np.diff(self.t) > 0) and np.all(np.diff(self.values) > 0)):
            raise ValueError("Nodes must be strictly increasing in both coordinates")
        if self.slopes is None:
            self.interpolation = "pchip"
            self._spline = PchipInterpolator(self.t, self.values)
        else:
            if not np.all(self.slopes > 0):
                raise ValueError("Slopes of an increasing map must be positive")
            self.interpolation = "hermite"
            self._spline = CubicHermiteSpline(self.t, self.values, self.slopes)

    def __call__(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore"):
            values = np.where((x >= self.t[0]) & (x <= self.t[-1]), self._spline(x), np.nan)
        return float(values) if values.ndim == 0 else values

    def derivative(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        values = np.where((x >= self.t[0]) & (x <= self.t[-1]), self._spline.derivative()(x), np.nan)
        return float(values) if values.ndim == 0 else values

    def inverse(self) -> "SampledMonotoneMap":
        return SampledMonotoneMap(self.values, self.t, None if self.slopes is None else 1 / self.slopes)

    @property
    def domain(self) -> Interval:
        return Interval(float(self.t[0]), float(self.t[-1]))

    @property
    def image(self) -> Interval:
        return Interval(float(self.values[0]), float(self.values[-1]))

    def rows(self) -> Iterator[Tuple[float, float]]:
        return zip(self.t.tolist(), self.values.tolist())

    def __len__(self) -> int:
        return len(self.t)

    def __repr__(self):
        return f"SampledMonotoneMap({len(self)} nodes, {self.domain} -> {self.image}, {self.interpolation})"


# ---------------------------------------------------------------- linearization

class SegmentChart:
    """An increasing map of the fundamental segment [x0, x1] onto [0, 1]."""
    x0: float
    x1: float

    def value(self, s: float) -> float:
        raise NotImplementedError

    def derivative(self, s: float) -> float:
        raise NotImplementedError

    def inverse(self, t: float) -> float:
        raise NotImplementedError


class AffineChart(SegmentChart):
    def __init__(self, x0: float, x1: float):
        self.x0, self.x1 = x0, x1
        self.width = x1 - x0

    def value(self, s: float) -> float:
        return (s - self.x0) / self.width

    def derivative(self, s: float) -> float:
        return 1 / self.width

    def inverse(self, t: float) -> float:
        return self.x0 + t * self.width


class BlendChart(SegmentChart):
    """
    Cubic Hermite chart with end slopes s0 = 2 r / ((1 + r) w) and s1 = s0 / r, where r = f'(x0) and w is the
    segment width; extending it by psi(f(x)) = psi(x) + 1 is then C1 at the seams.
    """

    def __init__(self, x0: float, x1: float, ratio: float):
        self.x0, self.x1 = x0, x1
        width = x1 - x0
        s0 = 2 * ratio / ((1 + ratio) * width)
        self._spline = CubicHermiteSpline([x0, x1], [0.0, 1.0], [s0, s0 / ratio])
        self._slope = self._spline.derivative()

    def value(self, s: float) -> float:
        return float(self._spline(s))

    def derivative(self, s: float) -> float:
        return float(self._slope(s))

    def inverse(self, t: float) -> float:
        if t <= 0:
            return self.x0
        if t >= 1:
            return self.x1
        return brentq(lambda s: self.value(s) - t, self.x0, self.x1, xtol=1e-15)


class BaseSegment(KindModel, discriminator="kind", default="blend"):
    """How a linearization maps its fundamental segment [x0, f(x0)] onto [0, 1]."""

    def chart(self, x0: float, x1: float, ratio: float) -> SegmentChart:
        raise NotImplementedError


class AffineSegment(BaseSegment, value="affine"):
    def chart(self, x0: float, x1: float, ratio: float) -> SegmentChart:
        return AffineChart(x0, x1)


class BlendSegment(BaseSegment, value="blend"):
    def chart(self, x0: float, x1: float, ratio: float) -> SegmentChart:
        return BlendChart(x0, x1, ratio)


AffineSegment().model_add_as_shorthand()
BlendSegment().model_add_as_shorthand()

_base_segments = TypeAdapter(KindAdapter[BaseSegment])


def as_base_segment(value: Union[BaseSegment, str, dict, None]) -> BaseSegment:
    return BlendSegment() if value is None else _base_segments.validate_python(value)


class Linearization:
    """
    psi with psi(x0) = 0 and psi(f(y)) = psi(y) + 1, exact up to inversion tolerance:
    psi(y) = k + chart(f^-k(y)) on the k-th fundamental segment [f^k(x0), f^(k+1)(x0)).
    `phi` is its inverse.
    """

    def __init__(self, gens: GeneratorSet, f: Word, x0: float, chart: SegmentChart, orbit: Dict[int, float]):
        self.gens, self.f, self.x0, self.chart = gens, f, x0, chart
        self.k_min = min(orbit)
        self.k_max = max(orbit) - 1
        self._points = [orbit[k] for k in range(self.k_min, self.k_max + 2)]

    @classmethod
    def build(cls, gens: GeneratorSet, f: Word, x0: float, *, base: Union[BaseSegment, str, None] = None, k_min: int|None = None, k_max: int|None = None, within: Interval = UNIT, max_segments: int = MAX_SEGMENTS, tol: float = FIXED_TOL) -> "Linearization":
        """
        Segments k_min..k_max (at most `max_segments` on each side when unbounded) whose ends stay inside `within`.
        """
        x1, ratio = eval_word_derivative(gens, f, x0)
        if not x1 - x0 > tol:
            raise FixedPointInput(f"{gens.format(f)} does not move x0={x0!r} to the right (f(x0) - x0 = {x1 - x0:.3e})")
        if not (within.lo < x0 and x1 < within.hi):
            raise ResolutionFailure(f"fundamental segment [{x0!r}, {x1!r}] is not inside {within}")
        chart = as_base_segment(base).chart(x0, x1, ratio)

        orbit = {0: x0, 1: x1}
        forward = max_segments if k_max is None else k_max + 1
        k = 1
        while k < forward:
            try:
                following = eval_word(gens, f, orbit[k])
            except OutOfDomain:
                break
            if not following < within.hi:
                break
            k += 1
            orbit[k] = following

        backward = max_segments if k_min is None else -k_min
        back = ~f
        k = 0
        while -k < backward:
            try:
                previous = eval_word(gens, back, orbit[k])
            except OutOfDomain:
                break
            if not previous > within.lo:
                break
            k -= 1
            orbit[k] = previous

        linearization = cls(gens, f, x0, chart, orbit)
        logger.debug("linearization of %s from %r: segments %d..%d", gens.format(f), x0, linearization.k_min, linearization.k_max)
        return linearization

    @property
    def domain(self) -> Interval:
        return Interval(self._points[0], self._points[-1])

    @property
    def segment_count(self) -> int:
        return self.k_max - self.k_min + 1

    def _segment(self, y: float) -> int:
        if not self._points[0] <= y <= self._points[-1]:
            raise NotInRange("psi", y, self._points[0], self._points[-1])
        return min(bisect_right(self._points, y) - 1 + self.k_min, self.k_max)

    def psi_with_derivative(self, y: float) -> Tuple[float, float]:
        k = self._segment(y)
        s, ds = eval_word_derivative(self.gens, self.f ** -k, y)
        return k + self.chart.value(s), self.chart.derivative(s) * ds

    def psi(self, y: float) -> float:
        return self.psi_with_derivative(y)[0]

    def phi_with_derivative(self, t: float) -> Tuple[float, float]:
        if not self.k_min <= t <= self.k_max + 1:
            raise NotInRange("phi", t, self.k_min, self.k_max + 1)
        k = min(math.floor(t), self.k_max)
        s = self.chart.inverse(t - k)
        x, dx = eval_word_derivative(self.gens, self.f ** k, s)
        return x, dx / self.chart.derivative(s)

    def phi(self, t: float) -> float:
        return self.phi_with_derivative(t)[0]

    def _push(self, node: Tuple[float, float], step: Word) -> Tuple[float, float]:
        x, slope = node
        y, dy = eval_word_derivative(self.gens, step, x)
        return y, slope / dy

    def sample(self, segments: int = SEGMENTS) -> SampledMonotoneMap:
        """psi at `segments` nodes per fundamental segment, images of the base nodes under powers of f."""
        if segments < 1:
            raise ValueError(f"segments must be positive, got {segments}")
        ts = np.linspace(0.0, 1.0, segments + 1)
        base = []
        for t in ts:
            s = self.chart.inverse(float(t))
            base.append((s, self.chart.derivative(s)))
        layers = {0: base}
        for k in range(1, self.k_max + 1):
            layers[k] = [self._push(node, self.f) for node in layers[k - 1]]
        back = ~self.f
        for k in range(-1, self.k_min - 1, -1):
            layers[k] = [self._push(node, back) for node in layers[k + 1]]

        xs, values, slopes = [], [], []
        for k in range(self.k_min, self.k_max + 1):
            nodes = layers[k] if k == self.k_max else layers[k][:-1]
            for j, (x, slope) in enumerate(nodes):
                xs.append(x)
                values.append(k + ts[j])
                slopes.append(slope)
        return SampledMonotoneMap(xs, values, slopes)


def linearize(gens: GeneratorSet, f: Word, x0: float, segments: int = SEGMENTS, range_k: int|None = None, *, base: Union[BaseSegment, str, None] = None, within: Interval = UNIT, max_segments: int = MAX_SEGMENTS, tol: float = FIXED_TOL) -> SampledMonotoneMap:
    """
    Sampled psi on I_range_k = (f^-range_k(x0), f^range_k(x0)), or on as much of the orbit of x0 as stays
    inside `within` when `range_k` is None.
    """
    k_min, k_max = (None, None) if range_k is None else (-range_k, range_k - 1)
    return Linearization.build(gens, f, x0, base=base, k_min=k_min, k_max=k_max, within=within, max_segments=max_segments, tol=tol).sample(segments)


@dataclass(frozen=True, eq=False)
class SemiConjugacy:
    phi: SampledMonotoneMap
    psi: SampledMonotoneMap
    a: Tuple[float, ...]
    residual: float

    @property
    def J(self) -> Interval:
        return self.phi.domain


def conjugacy_residual(gens: GeneratorSet, phi: SampledMonotoneMap, a: Sequence[float], samples: int = RESIDUAL_SAMPLES) -> float:
    """max over i and sampled t with t, t + a_i in J of |f_i(phi(t)) - phi(t + a_i)|"""
    ts = phi.domain.grid(samples)
    worst = 0.0
    for i, shift in enumerate(a):
        shifted = ts + shift
        valid = (shifted >= phi.t[0]) & (shifted <= phi.t[-1])
        if not valid.any():
            continue
        images = eval_word_grid(gens, Word.generator(i), phi(ts[valid]))
        difference = np.abs(images - phi(shifted[valid]))
        if np.any(np.isfinite(difference)):
            worst = max(worst, float(np.nanmax(difference)))
    return worst


def build_semi_conjugacy(gens: GeneratorSet, base: Word, a: Sequence[float], x0: float, segments: int = SEGMENTS, *, base_segment: Union[BaseSegment, str, None] = None, within: Interval = UNIT, max_segments: int = MAX_SEGMENTS, residual_samples: int = RESIDUAL_SAMPLES, tol: float = FIXED_TOL) -> SemiConjugacy:
    """phi = psi^-1 for the linearization psi of `base` from `x0`, with its conjugacy residual for the constants `a`."""
    if len(a) != len(gens):
        raise ValueError(f"Expected {len(gens)} constants, got {len(a)}")
    psi = linearize(gens, base, x0, segments, base=base_segment, within=within, max_segments=max_segments, tol=tol)
    phi = psi.inverse()
    residual = conjugacy_residual(gens, phi, a, residual_samples)
    logger.info("semi-conjugacy on J=%s: residual %.3e", phi.domain, residual)
    return SemiConjugacy(phi, psi, tuple(float(value) for value in a), residual)


# ---------------------------------------------------------------- reference map and point classification

class Move(NamedTuple):
    index: int
    sign: int
    value: float

    @property
    def word(self) -> Word:
        return Word.generator(self.index, self.sign)


def maximal_move(gens: GeneratorSet, b: float) -> Move:
    """The generator or inverse with the largest f(b); ties go to the lower index, then to the generator."""
    best: Optional[Move] = None
    for i in range(len(gens)):
        for sign in (1, -1):
            try:
                value = eval_word(gens, Word.generator(i, sign), b)
            except OutOfDomain:
                continue
            if best is None or (value, -i, sign) > (best.value, -best.index, best.sign):
                best = Move(i, sign, value)
    if best is None:
        raise OutOfDomain(0, b)
    return best


class PointClassification(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    x0: float
    case: Literal[1, 2, 3]
    reference: Optional[str] = None
    reference_word: Optional[Word] = Field(default=None, exclude=True)
    taus: List[RotationEstimate] = []

    @property
    def low_confidence(self) -> bool:
        return any(tau.low_confidence for tau in self.taus)


def classify_point(gens: GeneratorSet, x0: float, *, tol: float = IDENTITY_TOL, n_iters: int = N_ITERS, q_max: int = Q_MAX) -> PointClassification:
    """
    Local version of the classification at `x0`: case 1 when every generator fixes it, otherwise case 2
    when some tau(f_i, f, x0) is irrational and case 3 when all are rational, f being the maximal move.
    """
    if all(abs(eval_word(gens, Word.generator(i), x0) - x0) < tol for i in range(len(gens))):
        return PointClassification(x0=x0, case=1)
    move = maximal_move(gens, x0)
    taus = thread_map(
        lambda i: rational_identify(relative_translation_number(gens, move.word, Word.generator(i), x0, n_iters, tol=tol), q_max),
        range(len(gens)),
    )
    case = 3 if all(tau.is_rational for tau in taus) else 2
    return PointClassification(x0=x0, case=case, reference=gens.format(move.word), reference_word=move.word, taus=taus)


# ---------------------------------------------------------------- periodic chains

def bezout(a: Sequence[int]) -> Tuple[int, ...]:
    """Integers c with sum(c_i * a_i) = gcd(a), by iterated extended Euclid."""
    divisor, coefficients = 0, []
    for value in a:
        x, y, divisor = (int(v) for v in igcdex(divisor, value))
        coefficients = [c * x for c in coefficients] + [y]
    return tuple(coefficients)


def step_words(a: Sequence[int], coefficients: Sequence[int]) -> Tuple[Word, Word]:
    """
    Words moving one chain step forward and backward. Forward applies the letters moving left first,
    backward the letters moving right first, so that both stay inside (-1, 1) near its ends.
    """
    right, left = Word(), Word()
    for i, (ai, ci) in enumerate(zip(a, coefficients)):
        if ci == 0:
            continue
        power = Word.generator(i, ci)
        if ai * ci > 0:
            right = right * power
        else:
            left = left * power
    return right * left, ~right * ~left


@dataclass(frozen=True)
class PeriodicChain:
    """y_-N < ... < y_N with f_i(y_k) = y_(k + a_i) whenever both ends are on the chain."""
    points: Tuple[float, ...]
    a: Tuple[int, ...]
    N: int
    q: int
    forward: Word
    backward: Word
    reference: Word
    residual: float

    def y(self, k: int) -> float:
        if not -self.N <= k <= self.N:
            raise IndexError(f"chain index {k} outside [-{self.N}, {self.N}]")
        return self.points[k + self.N]

    def indexed(self) -> Iterator[Tuple[int, float]]:
        return zip(range(-self.N, self.N + 1), self.points)


def _chain_start(gens: GeneratorSet, x0: float, a: Sequence[int], forward: Word, backward: Word, reference: Word, tol: float) -> float:
    span = 1.5 * abs(eval_word(gens, reference, x0) - x0)
    window = Interval(x0 - span, x0 + span).intersect(UNIT)
    common: Optional[FixedPointSet] = None
    for i, ai in enumerate(a):
        steps_back = backward ** ai if ai >= 0 else forward ** -ai
        returning = steps_back * Word.generator(i)
        found = fixed_points(gens, returning, window, tol, CHAIN_GRID)
        common = found if common is None else common.intersect(found)
    y0 = None if common is None else common.nearest(x0)
    if y0 is None:
        raise ChainInconsistent(f"the return words have no common fixed point near x0={x0!r}")
    if y0 > x0 + tol:
        y0 = eval_word(gens, backward, y0)
    return y0


def find_periodic_chain(gens: GeneratorSet, x0: float, tol: float = CHAIN_TOL, *, q_max: int = Q_MAX, n_iters: int = N_ITERS, taus: Sequence[RotationEstimate]|None = None, reference: Word|None = None, fixed_tol: float = FIXED_TOL, tau_tol: float = IDENTITY_TOL, max_length: int = MAX_CHAIN) -> PeriodicChain:
    """
    The chain of the rational case. With q the common denominator of tau(f_i, f, x0), a_i = q tau_i; the chain
    steps by a word h with translation 1 / q (Bezout on the a_i), starting from a common fixed point y_0 of
    the return words h^-a_i f_i next to x0, and runs past 1 - eps and -1 + eps; the points between those
    crossings are indexed -N..N from their middle, so y_0 need not be the start point.
    """
    if taus is None or reference is None:
        point = classify_point(gens, x0, tol=tau_tol, n_iters=n_iters, q_max=q_max)
        if point.case == 1:
            raise ChainInconsistent(f"x0={x0!r} is a common fixed point")
        taus, reference = point.taus, point.reference_word
    irrational = [gens.names[i] for i, tau in enumerate(taus) if not tau.is_rational]
    if irrational:
        raise RationalityMismatch(f"tau of {', '.join(irrational)} has no rational value with denominator <= {q_max}")
    q = math.lcm(*(tau.rational[1] for tau in taus))
    if q > q_max:
        raise RationalityMismatch(f"common denominator {q} exceeds q_max={q_max}")
    a = tuple(tau.rational[0] * (q // tau.rational[1]) for tau in taus)
    forward, backward = step_words(a, bezout(a))
    logger.debug("chain constants %s, step %s", a, gens.format(forward))

    y0 = _chain_start(gens, x0, a, forward, backward, reference, fixed_tol)
    epsilon = gens.epsilon

    def extend(points: List[float], step: Word, unfinished: Callable[[float], bool]) -> None:
        while unfinished(points[-1]):
            if len(points) > max_length:
                raise ChainInconsistent(f"chain longer than {max_length} points")
            try:
                points.append(eval_word(gens, step, points[-1]))
            except OutOfDomain as e:
                raise ChainInconsistent(f"chain step {gens.format(step)} left the domain after {len(points) - 1} points: {e}") from None

    upper, lower = [y0], [y0]
    extend(upper, forward, lambda y: y <= 1 - epsilon)
    extend(lower, backward, lambda y: y >= -1 + epsilon)
    chain = lower[::-1] + upper[1:]
    if len(chain) % 2 == 0:
        # an odd count lets the chain be indexed -N..N; grow whichever end still has room
        for step, end in ((forward, -1), (backward, 0)):
            try:
                extra = eval_word(gens, step, chain[end])
            except OutOfDomain:
                continue
            if -1 < extra < 1:
                chain.insert(len(chain) if end else 0, extra)
                break
        else:
            raise ChainInconsistent(f"chain of {len(chain)} points cannot be extended to an odd length inside (-1, 1)")
    points = tuple(chain)
    N = (len(points) - 1) // 2
    if not N > max(abs(ai) for ai in a):
        raise ChainInconsistent(f"chain half-length N={N} does not exceed the constants {a}")

    residual = 0.0
    for i, ai in enumerate(a):
        letter = Word.generator(i)
        for k in range(-N, N + 1):
            y = points[k + N]
            if not (-N <= k + ai <= N and -1 < y < 1):
                continue
            difference = abs(eval_word(gens, letter, y) - points[k + ai + N])
            residual = max(residual, difference)
            if difference > tol:
                raise ChainInconsistent(f"{gens.names[i]}(y_{k}) differs from y_{k + ai} by {difference:.3e}")
    logger.info("periodic chain: a=%s, q=%d, N=%d, residual %.3e", a, q, N, residual)
    return PeriodicChain(points, a, N, q, forward, backward, reference, residual)


# ---------------------------------------------------------------- stabilizer reduction

@dataclass(frozen=True)
class ReducedFamily:
    """Words fixing y_0 and y_1: one per non-pivot generator, plus every [f_j, f_k]."""
    gens: GeneratorSet
    stabilizers: Tuple[Word, ...]
    labels: Tuple[str, ...]
    commutators: Tuple[Word, ...]
    commutator_labels: Tuple[str, ...]
    pivot: int
    pivot_sign: int

    @property
    def words(self) -> Tuple[Word, ...]:
        return self.stabilizers + self.commutators

    @property
    def all_labels(self) -> Tuple[str, ...]:
        return self.labels + self.commutator_labels

    def __len__(self) -> int:
        return len(self.stabilizers) + len(self.commutators)

    def check_commuting(self, tol: float = IDENTITY_TOL, n_samples: int = IDENTITY_SAMPLES) -> Tuple[bool, NilpotencyReport]:
        return verify_metabelian(self.gens, tol, n_samples, extra=list(zip(self.stabilizers, self.labels)))


def stabilizer_reduction(gens: GeneratorSet, chain: PeriodicChain, tol: float = CHAIN_TOL) -> ReducedFamily:
    """
    With pivot p the last generator with a_p != 0 (inverted when a_p < 0, so A = |a_p| > 0),
    F_(i,0) = id and F_(i,j+1) = f_p^-floor(k/A) f_i F_(i,j) where f_i(F_(i,j)(y_0)) = y_k; the stabilizer of f_i
    is F_(i,A).
    """
    a = chain.a
    nonzero = [i for i, ai in enumerate(a) if ai]
    if not nonzero:
        raise ChainInconsistent("every chain constant is zero")
    pivot = nonzero[-1]
    sign = 1 if a[pivot] > 0 else -1
    steps = abs(a[pivot])
    pivot_word = Word.generator(pivot, sign)

    stabilizers, labels = [], []
    for i in range(len(gens)):
        if i == pivot:
            continue
        word, position = Word(), 0
        for _ in range(steps):
            k = position + a[i]
            back = k // steps
            word = pivot_word ** -back * Word.generator(i) * word
            position = k - back * steps
        for index in (0, 1):
            y = chain.y(index)
            moved = eval_word(gens, word, y) - y
            if abs(moved) > tol:
                raise ChainInconsistent(f"stabilizer {gens.format(word)} moves y_{index} by {moved:.3e}")
        stabilizers.append(word)
        labels.append(f"{gens.names[i]}~")

    commutators, commutator_labels = [], []
    for j in range(len(gens)):
        for k in range(j + 1, len(gens)):
            commutators.append(commutator(Word.generator(j), Word.generator(k)))
            commutator_labels.append(f"[{gens.names[j]},{gens.names[k]}]")

    family = ReducedFamily(gens, tuple(stabilizers), tuple(labels), tuple(commutators), tuple(commutator_labels), pivot, sign)
    logger.info("stabilizer reduction around pivot %s: %d words", gens.names[pivot], len(family))
    return family


# ---------------------------------------------------------------- classification

class ClassifyConfig(BaseModel):
    identity_tol: PositiveFloat = IDENTITY_TOL
    identity_samples: PositiveInt = IDENTITY_SAMPLES
    fixed_tol: PositiveFloat = FIXED_TOL
    chain_tol: PositiveFloat = CHAIN_TOL
    grid: PositiveInt = GRID
    n_iters: PositiveInt = N_ITERS
    q_max: PositiveInt = Q_MAX
    segments: PositiveInt = SEGMENTS
    max_segments: PositiveInt = MAX_SEGMENTS
    residual_samples: PositiveInt = RESIDUAL_SAMPLES
    divergence_steps: PositiveInt = DIVERGENCE_STEPS
    base_segment: KindAdapter[BaseSegment] = BlendSegment()


class FixedPointSummary(BaseModel):
    points: List[float]
    plateaus: List[Tuple[float, float]]
    tol: float

    @classmethod
    def of(cls, fixed: FixedPointSet) -> "FixedPointSummary":
        return cls(points=list(fixed.points), plateaus=[(p.lo, p.hi) for p in fixed.plateaus], tol=fixed.tol)


EndStatus = Literal["boundary", "divergent", "inconclusive"]


class ComponentReport(BaseModel):
    interval: Tuple[float, float]
    b: float
    reference: str
    a: List[float]
    taus: List[RotationEstimate]
    J: Tuple[float, float]
    lower_end: EndStatus
    upper_end: EndStatus
    residual: float


class IrrationalReport(BaseModel):
    x0: float
    reference: str
    a: List[float]
    taus: List[RotationEstimate]
    J: Tuple[float, float]
    J_length: float
    J_exceeds_a: bool
    near_equality: bool
    x0_interior: bool
    residual: float


class ChainReport(BaseModel):
    x0: float
    reference: str
    a: List[int]
    q: int
    N: int
    y: List[float]
    step: str
    taus: List[RotationEstimate]
    residual: float
    reduced_family: List[str]
    reduced_commute: bool


class ClassificationReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    schema_version: int = report_schema_version
    case: Optional[Literal[1, 2, 3]] = None
    ambiguous: bool = False
    candidates: List[int] = []
    epsilon: float
    epsilon_bound: float
    epsilon_within_bound: bool
    common_fixed_points: FixedPointSummary
    components: List[ComponentReport] = []
    irrational: Optional[IrrationalReport] = None
    chain: Optional[ChainReport] = None
    abelian: bool
    metabelian: bool
    nilpotency: NilpotencyReport
    maps: Dict[str, SampledMonotoneMap] = Field(default_factory=dict, exclude=True)


def _end_status(gens: GeneratorSet, step: Word, b: float, interval: Interval, steps: int) -> EndStatus:
    # psi(f^-k(b)) = -k, so |psi| passes `steps` exactly when the orbit stays in the interval that long
    x = b
    for _ in range(steps):
        try:
            x = eval_word(gens, step, x)
        except OutOfDomain:
            return "inconclusive"
        if x not in interval:
            return "inconclusive"
    return "divergent"


def _component(gens: GeneratorSet, interval: Interval, invariant: InvariantSetApprox, config: ClassifyConfig) -> Tuple[ComponentReport, SemiConjugacy]:
    b = invariant.nearest(0.5 * (interval.lo + interval.hi), within=interval)
    if b is None:
        raise ResolutionFailure(f"no point of the invariant set lies in {interval}")
    move = maximal_move(gens, b)
    taus = [
        rational_identify(relative_translation_number(gens, move.word, Word.generator(i), b, config.n_iters, tol=config.identity_tol), config.q_max)
        for i in range(len(gens))
    ]
    a = [tau.refined for tau in taus]
    conjugacy = build_semi_conjugacy(
        gens, move.word, a, b, config.segments, base_segment=config.base_segment, within=interval,
        max_segments=config.max_segments, residual_samples=config.residual_samples, tol=config.fixed_tol,
    )
    ends = []
    for edge, step in ((interval.lo, ~move.word), (interval.hi, move.word)):
        if abs(edge) >= 1:
            ends.append("boundary")
            continue
        status = _end_status(gens, step, b, interval, config.divergence_steps)
        if status == "inconclusive":
            logger.warning("divergence of psi towards the common fixed point %r is inconclusive", edge)
        ends.append(status)
    J = conjugacy.J
    report = ComponentReport(
        interval=(interval.lo, interval.hi), b=b, reference=gens.format(move.word), a=a, taus=taus,
        J=(J.lo, J.hi), lower_end=ends[0], upper_end=ends[1], residual=conjugacy.residual,
    )
    return report, conjugacy


def classify(gens: GeneratorSet, config: ClassifyConfig|None = None) -> ClassificationReport:
    """
    Gate on the claimed nilpotency order, then: common fixed points give case 1; otherwise the relative
    translation numbers at the invariant-set point nearest 0 split cases 2 and 3. A low-confidence rational
    identification raises `AmbiguousResolution` carrying a report with both candidates.
    """
    config = config or ClassifyConfig()
    nilpotency = verify_near_identity_nilpotent(gens, None, config.identity_tol, config.identity_samples)
    if not nilpotency.commutators_pass:
        raise HypothesisFailure(f"commutators of order {nilpotency.claimed_order} are not the identity: {', '.join(nilpotency.failed_words)}", nilpotency)
    if not nilpotency.epsilon_within_bound:
        logger.warning("epsilon=%.3g exceeds %.3g; classifying anyway", nilpotency.epsilon, nilpotency.epsilon_bound)
    if nilpotency.claimed_order == 1:
        abelian = True
    else:
        abelian, _ = verify_abelian(gens, config.identity_tol, config.identity_samples)

    common = common_fixed_points(gens, config.fixed_tol, config.grid)
    invariant = invariant_commuting_set(gens, config.identity_tol, config.grid)
    header = dict(
        epsilon=gens.epsilon, epsilon_bound=nilpotency.epsilon_bound, epsilon_within_bound=bool(nilpotency.epsilon_within_bound),
        common_fixed_points=FixedPointSummary.of(common), abelian=abelian, nilpotency=nilpotency,
    )

    if not common.empty:
        metabelian, _ = verify_metabelian(gens, config.identity_tol, config.identity_samples)
        results = thread_map(lambda interval: _component(gens, interval, invariant, config), complementary_intervals(common))
        maps = {}
        for j, (_, conjugacy) in enumerate(results):
            maps[f"psi_{j}"] = conjugacy.psi
            maps[f"phi_{j}"] = conjugacy.phi
        logger.info("case 1: %d complementary intervals", len(results))
        return ClassificationReport(case=1, components=[report for report, _ in results], metabelian=metabelian, maps=maps, **header)

    x0 = invariant.nearest(0.0)
    point = classify_point(gens, x0, tol=config.identity_tol, n_iters=config.n_iters, q_max=config.q_max)
    if point.low_confidence:
        metabelian, _ = verify_metabelian(gens, config.identity_tol, config.identity_samples)
        report = ClassificationReport(ambiguous=True, candidates=[2, 3], metabelian=metabelian, **header)
        doubtful = [gens.names[i] for i, tau in enumerate(point.taus) if tau.low_confidence]
        raise AmbiguousResolution(f"rational identification of tau for {', '.join(doubtful)} is low-confidence at q_max={config.q_max}", report)

    if point.case == 2:
        metabelian, _ = verify_metabelian(gens, config.identity_tol, config.identity_samples)
        a = [tau.refined for tau in point.taus]
        conjugacy = build_semi_conjugacy(
            gens, point.reference_word, a, x0, config.segments, base_segment=config.base_segment,
            max_segments=config.max_segments, residual_samples=config.residual_samples, tol=config.fixed_tol,
        )
        J = conjugacy.J
        largest = max(abs(value) for value in a)
        exceeds = J.length > largest
        if not exceeds:
            logger.warning("|J| = %.6g does not exceed max |a_i| = %.6g", J.length, largest)
        irrational = IrrationalReport(
            x0=x0, reference=point.reference, a=a, taus=point.taus, J=(J.lo, J.hi), J_length=J.length,
            J_exceeds_a=exceeds, near_equality=J.length - largest < 1 / config.segments,
            x0_interior=invariant.covers_neighbourhood(x0), residual=conjugacy.residual,
        )
        logger.info("case 2: a=%s, residual %.3e", a, conjugacy.residual)
        return ClassificationReport(case=2, irrational=irrational, metabelian=metabelian, maps={"psi": conjugacy.psi, "phi": conjugacy.phi}, **header)

    chain = find_periodic_chain(
        gens, x0, config.chain_tol, q_max=config.q_max, n_iters=config.n_iters, taus=point.taus,
        reference=point.reference_word, fixed_tol=config.fixed_tol, tau_tol=config.identity_tol,
    )
    reduced = stabilizer_reduction(gens, chain, config.chain_tol)
    reduced_commute, _ = reduced.check_commuting(config.identity_tol, config.identity_samples)
    metabelian, _ = verify_metabelian(gens, config.identity_tol, config.identity_samples)
    report = ChainReport(
        x0=x0, reference=point.reference, a=list(chain.a), q=chain.q, N=chain.N, y=list(chain.points),
        step=gens.format(chain.forward), taus=point.taus, residual=chain.residual,
        reduced_family=[f"{label} = {gens.format(word)}" for label, word in zip(reduced.all_labels, reduced.words)],
        reduced_commute=reduced_commute,
    )
    logger.info("case 3: a=%s, N=%d", list(chain.a), chain.N)
    return ClassificationReport(case=3, chain=report, metabelian=metabelian, **header)
