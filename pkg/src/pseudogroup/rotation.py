"""
Translation numbers.

`rotation_number` is the classical one of a degree-one map: the share of the orbit a_0 = 0,
a_(n+1) = u(a_n) mod 1 that lands in [0, u(0)). `relative_translation_number` measures how far a word f2
moves along the orbit of a word f1 from a point x0 fixed by every commutator, counting f1-steps.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from pydantic import BaseModel, ConfigDict
from sympy import Rational, continued_fraction_convergents, continued_fraction_iterator
from typing_extensions import Callable, List, NamedTuple, Optional, Tuple

from .errors import CommutatorNotFixed, EstimatorDivergence, FixedPointInput, IterationEscaped, NotDegreeOne, OutOfDomain
from .nilpotency import enumerate_commutators
from .pmap import GeneratorSet, Word, eval_word, eval_word_derivative

logger = logging.getLogger(__name__)

N_ITERS = 10_000
Q_MAX = 50
FIXED_TOL = 1e-8
LIFT_TOL = 1e-9


@dataclass(frozen=True)
class DegreeOneMap:
    """
    An increasing `u` on [0, 1] with u(1) = 1 + u(0), extended to the real line by u(x + 1) = u(x) + 1.
    Calling the map evaluates that extension.
    """
    u: Callable[[float], float]
    lift_tol: float = LIFT_TOL
    samples: int = 257

    def __post_init__(self):
        gap = self.u(1.0) - 1 - self.u(0.0)
        if not abs(gap) < self.lift_tol:
            raise NotDegreeOne(f"u(1) - 1 - u(0) = {gap!r} exceeds {self.lift_tol!r}")
        values = np.array([self.u(float(x)) for x in np.linspace(0.0, 1.0, self.samples)])
        if not np.all(np.diff(values) > 0):
            raise NotDegreeOne("u is not strictly increasing on [0, 1]")

    @classmethod
    def translation(cls, alpha: float) -> "DegreeOneMap":
        return cls(lambda x: x + alpha)

    def __call__(self, x: float) -> float:
        whole = math.floor(x)
        return self.u(x - whole) + whole

    def shifted(self, k: int) -> "DegreeOneMap":
        """u - k"""
        u = self.u
        return DegreeOneMap(lambda x: u(x) - k, self.lift_tol, self.samples)


class RotationEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    iterations: int
    error_bound: float
    rational: Optional[Tuple[int, int]] = None
    low_confidence: bool = False
    refined: Optional[float] = None
    orbit_average: Optional[float] = None
    normalization: str = "canonical"

    @property
    def is_rational(self) -> bool:
        return self.rational is not None

    @property
    def fraction(self) -> Optional[Fraction]:
        return Fraction(*self.rational) if self.rational else None

    def format(self, digits: int = 4) -> str:
        text = f"{self.value:.{digits}f} ± {self.error_bound:.{digits}f}"
        if self.rational is not None:
            p, q = self.rational
            text += f" (rational {p}/{q}{', low confidence' if self.low_confidence else ''})"
        else:
            text += " (irrational at resolution)"
        return text


class TraceRow(NamedTuple):
    n: int
    a: float
    k: int
    p: int


def rotation_number(u: DegreeOneMap, n_iters: int = N_ITERS) -> RotationEstimate:
    if n_iters < 1:
        raise ValueError(f"n_iters must be positive, got {n_iters}")
    shift = math.floor(u.u(0.0))
    v = u.shifted(shift) if shift else u
    start = v.u(0.0)

    a, p = 0.0, 0
    for _ in range(n_iters):
        if 0 <= a < start:
            p += 1
        image = v.u(a)
        a = image if image < 1 else image - 1

    x = 0.0
    for _ in range(n_iters):
        x = v(x)

    value = p / n_iters + shift
    orbit_average = x / n_iters + shift
    if abs(value - orbit_average) > 2 / n_iters:
        logger.error("Rotation number estimators disagree: proportion %r, orbit average %r", value, orbit_average)
        raise EstimatorDivergence(
            f"proportion estimate {value!r} and orbit average {orbit_average!r} differ by more than 2/{n_iters}",
            {"proportion": value, "orbit_average": orbit_average, "iterations": n_iters, "u0": start + shift},
        )
    return RotationEstimate(value=value, iterations=n_iters, error_bound=1 / n_iters, orbit_average=orbit_average, refined=orbit_average)


def _commutators_fix(gens: GeneratorSet, x0: float, tol: float):
    for tree in enumerate_commutators(gens, 1):
        label = tree.label(gens.names)
        try:
            moved = eval_word(gens, tree.word, x0)
        except OutOfDomain:
            raise CommutatorNotFixed(f"{label} is not defined at x0={x0!r}") from None
        if not abs(moved - x0) < tol:
            raise CommutatorNotFixed(f"x0={x0!r} is not fixed by {label} (moved by {moved - x0:.3e}); relative translation numbers need a point of the commuting set")


def _negated(inner: RotationEstimate, reason: str) -> RotationEstimate:
    return inner.model_copy(update={
        "value": -inner.value,
        "refined": None if inner.refined is None else -inner.refined,
        "orbit_average": None if inner.orbit_average is None else -inner.orbit_average,
        "rational": None if inner.rational is None else (-inner.rational[0], inner.rational[1]),
        "normalization": f"negation[{reason}]({inner.normalization})",
    })


def _reciprocal(inner: RotationEstimate) -> RotationEstimate:
    t, err = inner.value, inner.error_bound
    if t == 0:
        raise EstimatorDivergence("reciprocal of a zero translation number", {"estimate": inner.model_dump()})
    refined = None if not inner.refined else 1 / inner.refined
    return inner.model_copy(update={
        "value": 1 / t,
        "error_bound": err / (t * (t - err)) if t > err else math.inf,
        "refined": refined,
        "orbit_average": refined,
        "rational": None,
        "normalization": f"reciprocal({inner.normalization})",
    })


def _canonical(gens: GeneratorSet, f1: Word, f2: Word, x0: float, n_iters: int, tol: float, trace: Optional[List[TraceRow]]) -> RotationEstimate:
    upper = eval_word(gens, f1, x0)
    delta = upper - x0
    back = ~f1
    a, p = x0, 0
    for n in range(n_iters):
        try:
            b = eval_word(gens, f2, a)
            k = 1 if b >= upper else 0
            following = eval_word(gens, back, b) if k else b
        except OutOfDomain as e:
            logger.error("Relative translation iteration left the domain at step %d (a_n=%r): %s", n, a, e)
            raise
        if trace is not None:
            trace.append(TraceRow(n, a, k, p))
        p += k
        a = following
        if not x0 - tol <= a < upper + tol:
            logger.error("Relative translation iteration escaped [%r, %r) at step %d: a=%r", x0, upper, n + 1, a)
            raise IterationEscaped(f"a_{n + 1} = {a!r} is outside [x0, f1(x0)) = [{x0!r}, {upper!r})")
    value = p / n_iters
    # a_n stays in [x0, f1(x0)), so the refined value is within 1/n of the count
    refined = (p + (a - x0) / delta) / n_iters
    return RotationEstimate(value=value, iterations=n_iters, error_bound=1 / n_iters, refined=refined, orbit_average=refined)


def _relative(gens: GeneratorSet, f1: Word, f2: Word, x0: float, n_iters: int, tol: float, trace: Optional[List[TraceRow]]) -> RotationEstimate:
    d1 = eval_word(gens, f1, x0) - x0
    if abs(d1) <= tol:
        raise FixedPointInput(f"x0={x0!r} is fixed by {gens.format(f1)} (moved by {d1:.3e})")
    if d1 < 0:
        return _negated(_relative(gens, ~f1, f2, x0, n_iters, tol, trace), "f1 moves left")
    d2 = eval_word(gens, f2, x0) - x0
    if d2 < -tol:
        return _negated(_relative(gens, f1, ~f2, x0, n_iters, tol, trace), "f2 moves left")
    if d2 > d1 + tol:
        return _reciprocal(_relative(gens, f2, f1, x0, n_iters, tol, trace))
    return _canonical(gens, f1, f2, x0, n_iters, tol, trace)


def relative_translation_number(gens: GeneratorSet, f1: Word, f2: Word, x0: float, n_iters: int = N_ITERS, *, tol: float = FIXED_TOL, trace: Optional[List[TraceRow]] = None) -> RotationEstimate:
    """
    tau(f2, f1, x0), the average number of f1-steps made by one application of f2 along the orbit of x0.

    The iteration runs in the ordering f1^-1(x0) < x0 <= f2(x0) <= f1(x0); other orderings reduce to it by
    tau(f2, f1) = -tau(f2, f1^-1) when f1 moves x0 left, tau(f2, f1) = -tau(f2^-1, f1) when f2 does, and
    tau(f2, f1) = 1 / tau(f1, f2) when f2 moves x0 further than f1. Equalities within `tol` count as
    satisfying the inequalities. Rows (n, a_n, k(n), p(n)) of the canonical iteration go to `trace`.
    """
    if n_iters < 1:
        raise ValueError(f"n_iters must be positive, got {n_iters}")
    _commutators_fix(gens, x0, tol)
    estimate = _relative(gens, f1, f2, x0, n_iters, tol, trace)
    logger.debug("tau(%s, %s, %r) = %r (%s)", gens.format(f2), gens.format(f1), x0, estimate.value, estimate.normalization)
    return estimate


def circle_lift(gens: GeneratorSet, f1: Word, f2: Word, x0: float, segments: int = 64, *, base=None, tol: float = FIXED_TOL) -> DegreeOneMap:
    """
    The degree-one map agreeing on [0, 1] with s o f2 o s^-1, where s(x) = sign * psi(x), psi linearizes
    whichever of f1, f1^-1 moves x0 to the right, and sign is +1 for f1 and -1 for f1^-1. In the coordinate s,
    f1 is t -> t + 1, so the rotation number of the lift is tau(f2, f1, x0).
    """
    # classify builds on this module; its linearization is only needed here
    from .classify import Linearization, SampledMonotoneMap

    _commutators_fix(gens, x0, tol)
    moved = eval_word(gens, f1, x0) - x0
    if abs(moved) <= tol:
        raise FixedPointInput(f"x0={x0!r} is fixed by {gens.format(f1)} (moved by {moved:.3e})")
    sign = 1 if moved > 0 else -1
    psi = Linearization.build(gens, f1 if sign > 0 else ~f1, x0, base=base, tol=tol)
    ts = np.linspace(0.0, 1.0, segments + 1)
    values, slopes = [], []
    for t in ts:
        x, dx = psi.phi_with_derivative(sign * float(t))
        y, dy = eval_word_derivative(gens, f2, x)
        value, dvalue = psi.psi_with_derivative(y)
        values.append(sign * value)
        slopes.append(dvalue * dy * dx)
    return DegreeOneMap(SampledMonotoneMap(ts, np.asarray(values), np.asarray(slopes)))


def _fraction_inside(value: float, radius: float, q_max: int) -> List[Fraction]:
    found = set()
    for q in range(1, q_max + 1):
        p = round(value * q)
        if abs(value - p / q) <= radius:
            found.add(Fraction(p, q))
    return sorted(found)


def rational_identify(est: RotationEstimate, q_max: int = Q_MAX) -> RotationEstimate:
    """
    Accept the first continued-fraction convergent p/q of the estimate with q <= q_max and
    |value - p/q| <= max(error_bound, 1 / (2 q q_max)); otherwise the value is irrational at this resolution.
    The result is low-confidence when another fraction with q <= q_max also lies within the error bound.
    """
    if q_max < 1:
        raise ValueError(f"q_max must be positive, got {q_max}")
    value, err = est.value, est.error_bound
    chosen = None
    for convergent in continued_fraction_convergents(continued_fraction_iterator(Rational(value))):
        p, q = int(convergent.p), int(convergent.q)
        if q > q_max:
            break
        if abs(value - p / q) <= max(err, 1 / (2 * q * q_max)):
            chosen = Fraction(p, q)
            break

    others = [fraction for fraction in _fraction_inside(value, err, q_max) if fraction != chosen]
    low_confidence = chosen is not None and bool(others)
    if low_confidence:
        logger.warning("%r ± %r identified as %s, but %s also fit", value, err, chosen, ", ".join(map(str, others[:5])))
    rational = None if chosen is None else (chosen.numerator, chosen.denominator)
    return est.model_copy(update={"rational": rational, "low_confidence": low_confidence})
