"""
Partial increasing maps on (-1, 1).

Pseudogroup elements are `Word`s over a `GeneratorSet`. A word is evaluated right to left and is
defined at `x` when every intermediate value (the input of each letter) lies in (-1, 1) and every
inverse letter receives a value in the range of its generator; the final value may leave (-1, 1).
"""
import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from typing_extensions import Iterable, Iterator, List, Mapping, Sequence, Tuple, Union, TypeAlias

from .errors import DomainError, InvalidGenerator, NotInRange, OutOfDomain, UnknownGenerator
from .expr import Node, compile_scalar, compile_vector, differentiate, parse, to_text

logger = logging.getLogger(__name__)

# generators are only given on the open interval; their limits are sampled this far inside
OPEN_EDGE = 1e-6
INVERSION_TOL = 1e-12
DOMAIN_TOL = 1e-9
C1_SAMPLES = 4097


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi); empty when lo >= hi."""
    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return not self.lo < self.hi

    @property
    def length(self) -> float:
        return 0.0 if self.empty else self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo < x < self.hi

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def covers(self, other: "Interval", tol: float = 0.0) -> bool:
        """Whether `other` lies inside this interval, endpoints compared up to `tol`."""
        if other.empty:
            return True
        return self.lo <= other.lo + tol and other.hi <= self.hi + tol

    def grid(self, n: int) -> np.ndarray:
        """`n` evenly spaced points strictly inside the interval."""
        return np.linspace(self.lo, self.hi, n + 2)[1:-1]

    def __str__(self):
        return "(empty)" if self.empty else f"({self.lo!r}, {self.hi!r})"


UNIT = Interval(-1.0, 1.0)
EMPTY = Interval(0.0, 0.0)


@dataclass(frozen=True)
class Generator:
    name: str
    f: Node
    df: Node

    def __post_init__(self):
        object.__setattr__(self, "_f", compile_scalar(self.f))
        object.__setattr__(self, "_df", compile_scalar(self.df))
        object.__setattr__(self, "_fv", compile_vector(self.f))
        object.__setattr__(self, "_dfv", compile_vector(self.df))

    @classmethod
    def from_text(cls, name: str, text: str, *, samples: int = 257) -> "Generator":
        f = parse(text)
        generator = cls(name, f, differentiate(f))
        generator.validate(samples)
        return generator

    def validate(self, samples: int = 257):
        xs = UNIT.grid(samples)
        slopes = self.derivatives(xs)
        if not np.all(np.isfinite(slopes)) or not np.all(np.isfinite(self.values(xs))):
            raise InvalidGenerator(f"{self.name} = {to_text(self.f)} is not defined on all of (-1, 1)")
        if np.any(slopes <= 0):
            raise InvalidGenerator(f"{self.name} = {to_text(self.f)} is not strictly increasing (derivative {slopes.min()!r})")
        distance = c1_distance(self, samples)
        if not distance < 1:
            raise InvalidGenerator(f"{self.name} = {to_text(self.f)} is too far from the identity (C1 distance {distance!r})")

    def __call__(self, x: float) -> float:
        return self._f(x)

    def derivative(self, x: float) -> float:
        return self._df(x)

    def values(self, xs: np.ndarray) -> np.ndarray:
        return self._fv(xs)

    def derivatives(self, xs: np.ndarray) -> np.ndarray:
        return self._dfv(xs)

    @cached_property
    def range(self) -> Tuple[float, float]:
        """Image of (-1, 1), with the endpoint limits sampled at +-(1 - OPEN_EDGE)."""
        return self(-1 + OPEN_EDGE), self(1 - OPEN_EDGE)

    def __str__(self):
        return f"{self.name} = {to_text(self.f)}"


Letter: TypeAlias = Tuple[int, int]

_WORD_TOKEN = re.compile(r"(?P<name>[A-Za-z_]\w*)(?:\^(?P<power>[+-]?\d+))?")


def _reduce(letters: Iterable[Letter]) -> Tuple[Letter, ...]:
    stack: List[Letter] = []
    for index, sign in letters:
        if stack and stack[-1] == (index, -sign):
            stack.pop()
        else:
            stack.append((index, sign))
    return tuple(stack)


@dataclass(frozen=True)
class Word:
    """
    A freely reduced word over generator indices, written like a composition:
    `Word(((0, -1), (1, 1)))` is f1^-1 o f2 and applies f2 first.
    """
    letters: Tuple[Letter, ...] = ()

    def __post_init__(self):
        letters = tuple((int(index), int(sign)) for index, sign in self.letters)
        for index, sign in letters:
            if index < 0 or sign not in (1, -1):
                raise ValueError(f"Invalid letter ({index}, {sign}), expected a non-negative index and a sign of +1 or -1")
        object.__setattr__(self, "letters", _reduce(letters))

    @classmethod
    def generator(cls, index: int, power: int = 1) -> "Word":
        sign = 1 if power >= 0 else -1
        return cls(((index, sign),) * abs(power))

    @classmethod
    def identity(cls) -> "Word":
        return cls()

    @classmethod
    def parse(cls, text: str, names: Sequence[str]) -> "Word":
        """Parse `"f1 f2^-1 f1^3"`; `""` and `"id"` are the identity."""
        letters: List[Letter] = []
        for token in text.split():
            if token == "id":
                continue
            match = _WORD_TOKEN.fullmatch(token)
            if match is None:
                raise UnknownGenerator(f"Cannot read {token!r} in word {text!r}, expected NAME or NAME^POWER")
            name = match.group("name")
            if name not in names:
                raise UnknownGenerator(f"Unknown generator {name!r} in word {text!r}, expected one of {list(names)}")
            power = int(match.group("power") or 1)
            letters.extend(cls.generator(list(names).index(name), power).letters)
        return cls(tuple(letters))

    def format(self, names: Sequence[str]|None = None) -> str:
        if not self.letters:
            return "id"
        def name(index: int) -> str:
            return names[index] if names is not None else f"f{index + 1}"
        return " ".join(name(index) if sign > 0 else f"{name(index)}^-1" for index, sign in self.letters)

    def __str__(self):
        return self.format()

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def __invert__(self) -> "Word":
        return Word(tuple((index, -sign) for index, sign in reversed(self.letters)))

    def __pow__(self, n: int) -> "Word":
        if n < 0:
            return (~self) ** -n
        return Word(self.letters * n)

    @property
    def is_identity(self) -> bool:
        return not self.letters

    def generators_used(self) -> Tuple[int, ...]:
        return tuple(sorted({index for index, _ in self.letters}))


def reduce(w: Word) -> Word:
    """Freely reduced copy of `w`; `Word` already reduces at construction."""
    return Word(w.letters)


@dataclass(frozen=True)
class GeneratorSet:
    generators: Tuple[Generator, ...]
    nilpotency_order_claimed: int = 1
    c1_samples: int = C1_SAMPLES
    inversion_tol: float = INVERSION_TOL
    epsilon: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise ValueError("A generator set needs at least one generator")
        if self.nilpotency_order_claimed < 1:
            raise ValueError(f"The claimed nilpotency order must be positive, got {self.nilpotency_order_claimed}")
        if not self.inversion_tol > 0:
            raise ValueError(f"inversion_tol must be positive, got {self.inversion_tol}")
        names = self.names
        if len(set(names)) != len(names):
            raise ValueError(f"Generator names must be unique, got {list(names)}")
        object.__setattr__(self, "epsilon", max(c1_distance(g, self.c1_samples) for g in self.generators))

    @classmethod
    def from_expressions(cls, expressions: Union[Mapping[str, str], Sequence[str]], m: int = 1, *, c1_samples: int = C1_SAMPLES, inversion_tol: float = INVERSION_TOL) -> "GeneratorSet":
        """Build from `{"f1": "x + 0.01", ...}` or from a plain list (named f1, f2, ...)."""
        if isinstance(expressions, Mapping):
            items = list(expressions.items())
        else:
            items = [(f"f{i + 1}", text) for i, text in enumerate(expressions)]
        return cls(tuple(Generator.from_text(name, text) for name, text in items), m, c1_samples, inversion_tol)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(g.name for g in self.generators)

    def __len__(self) -> int:
        return len(self.generators)

    def __getitem__(self, index: int) -> Generator:
        return self.generators[index]

    def __iter__(self) -> Iterator[Generator]:
        return iter(self.generators)

    def word(self, text: str) -> Word:
        return Word.parse(text, self.names)

    def letter(self, index: int, power: int = 1) -> Word:
        return Word.generator(index, power)

    def format(self, w: Word) -> str:
        return w.format(self.names)


def invert_generator(g: Generator, y: float, tol: float = INVERSION_TOL) -> float:
    """The preimage of `y` under `g`: Brent bracketing on (-1, 1) followed by a Newton polish."""
    lo, hi = -1 + OPEN_EDGE, 1 - OPEN_EDGE
    ylo, yhi = g.range
    if not ylo < y < yhi:
        raise NotInRange(g.name, y, ylo, yhi)
    x = brentq(lambda t: g(t) - y, lo, hi, xtol=tol)
    for _ in range(2):
        residual = g(x) - y
        if residual == 0:
            break
        candidate = x - residual / g.derivative(x)
        if lo < candidate < hi and abs(g(candidate) - y) < abs(residual):
            x = candidate
    return x


def _step(gens: GeneratorSet, w: Word, position: int, value: float, tol: float|None) -> float:
    index, sign = w.letters[position]
    if not -1 < value < 1:
        raise OutOfDomain(position, value, w)
    g = gens[index]
    try:
        if sign > 0:
            return g(value)
        ylo, yhi = g.range
        if not ylo < value < yhi:
            raise OutOfDomain(position, value, w)
        return invert_generator(g, value, gens.inversion_tol if tol is None else tol)
    except DomainError:
        raise OutOfDomain(position, value, w) from None


def eval_word(gens: GeneratorSet, w: Word, x: float, tol: float|None = None) -> float:
    """Apply `w` to `x`; raises `OutOfDomain` naming the first letter whose input is not admissible."""
    value = float(x)
    if not w.letters:
        if not -1 < value < 1:
            raise OutOfDomain(0, value, w)
        return value
    for position in range(len(w.letters) - 1, -1, -1):
        value = _step(gens, w, position, value, tol)
    return value


def eval_word_derivative(gens: GeneratorSet, w: Word, x: float, tol: float|None = None) -> Tuple[float, float]:
    """`(w(x), w'(x))`, the derivative accumulated by the chain rule along the letters."""
    value = float(x)
    slope = 1.0
    if not w.letters and not -1 < value < 1:
        raise OutOfDomain(0, value, w)
    for position in range(len(w.letters) - 1, -1, -1):
        index, sign = w.letters[position]
        image = _step(gens, w, position, value, tol)
        if sign > 0:
            slope *= gens[index].derivative(value)
        else:
            slope /= gens[index].derivative(image)
        value = image
    return value, slope


def is_defined(gens: GeneratorSet, w: Word, x: float, tol: float|None = None) -> bool:
    try:
        eval_word(gens, w, x, tol)
    except OutOfDomain:
        return False
    return True


def eval_word_grid(gens: GeneratorSet, w: Word, xs: Iterable[float], tol: float|None = None) -> np.ndarray:
    """Evaluate at many points, NaN where `w` is undefined."""
    values = []
    for x in xs:
        try:
            values.append(eval_word(gens, w, x, tol))
        except OutOfDomain:
            values.append(math.nan)
    return np.asarray(values, dtype=float)


def word_domain(gens: GeneratorSet, w: Word, tol: float = DOMAIN_TOL, samples: int = 257) -> Interval:
    """
    The maximal open interval on which `w` is defined, endpoints bisected to `tol`.
    Each letter is increasing, so definedness can only switch once on each side of a defined point.
    """
    grid = UNIT.grid(samples)
    inside = None
    for x in grid[np.argsort(np.abs(grid), kind="stable")]:
        if is_defined(gens, w, x):
            inside = float(x)
            break
    if inside is None:
        return EMPTY

    outside, defined = -1.0, inside
    while defined - outside > tol:
        middle = 0.5 * (outside + defined)
        if is_defined(gens, w, middle):
            defined = middle
        else:
            outside = middle
    lo = outside

    defined, outside = inside, 1.0
    while outside - defined > tol:
        middle = 0.5 * (outside + defined)
        if is_defined(gens, w, middle):
            defined = middle
        else:
            outside = middle
    return Interval(lo, outside)


def commutator(w1: Word, w2: Word) -> Word:
    """[w1, w2] = w1^-1 w2^-1 w1 w2"""
    return ~w1 * ~w2 * w1 * w2


def c1_distance(g: Generator, n_samples: int = C1_SAMPLES) -> float:
    """
    max(|f(x) - x|, |f'(x) - 1|) over a uniform grid of (-1 + 1e-6, 1 - 1e-6).
    A grid maximum, hence a lower bound of the sup norm.
    """
    if n_samples < 2:
        raise ValueError(f"c1_distance needs at least 2 samples, got {n_samples}")
    xs = np.linspace(-1 + OPEN_EDGE, 1 - OPEN_EDGE, n_samples)
    deviation = np.maximum(np.abs(g.values(xs) - xs), np.abs(g.derivatives(xs) - 1))
    if np.any(np.isnan(deviation)):
        return math.inf
    return float(deviation.max())


def orbit(gens: GeneratorSet, f: Word, x0: float, k_min: int, k_max: int, tol: float|None = None) -> dict:
    """`{k: f^k(x0)}` for k_min <= k <= k_max; raises `OutOfDomain` when the orbit leaves (-1, 1)."""
    points = {0: float(x0)}
    for direction, stop, step in ((1, k_max, f), (-1, k_min, ~f)):
        value = float(x0)
        for k in range(direction, stop + direction, direction):
            value = eval_word(gens, step, value, tol)
            points[k] = value
    return {k: points[k] for k in sorted(points) if k_min <= k <= k_max}


def fundamental_intervals(gens: GeneratorSet, f: Word, x0: float, k_max: int, tol: float|None = None) -> List[Interval]:
    """`[I_0, ..., I_k_max]` with I_k = (f^-k(x0), f^k(x0)); `f` must move `x0` to the right."""
    if k_max < 1:
        raise ValueError(f"k_max must be at least 1, got {k_max}")
    points = orbit(gens, f, x0, -k_max, k_max, tol)
    if not points[1] > points[0]:
        raise ValueError(f"{f} does not move {x0!r} to the right")
    return [Interval(points[-k], points[k]) for k in range(k_max + 1)]
