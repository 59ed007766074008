import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from pseudogroup import (
    Generator, GeneratorSet, InvalidGenerator, Interval, NotInRange, OutOfDomain, UnknownGenerator, Word,
    c1_distance, commutator, eval_word, eval_word_derivative, fundamental_intervals, is_defined, orbit, word_domain,
)
from pseudogroup.pmap import eval_word_grid, invert_generator

from ._common import expressions, mobius, translations


def test_word_reduction_and_algebra():
    f1, f2 = Word.generator(0), Word.generator(1)
    assert (f1 * ~f1).is_identity
    assert f1 ** 3 == Word(((0, 1),) * 3)
    assert f1 ** -2 == ~f1 * ~f1
    assert ~(f1 * f2) == ~f2 * ~f1
    assert Word(((0, 1), (1, 1), (1, -1), (0, -1))) == Word.identity()
    assert len(f1 * f2 * ~f2) == 1
    assert (f2 * f1 ** 2).generators_used() == (0, 1)


def test_word_parse_and_format():
    names = ("f1", "f2")
    w = Word.parse("f1 f2^-1 f1^3", names)
    assert w.letters == ((0, 1), (1, -1), (0, 1), (0, 1), (0, 1))
    assert w.format(names) == "f1 f2^-1 f1 f1 f1"
    assert Word.parse("id", names).is_identity
    assert Word.parse("", names).format(names) == "id"
    with pytest.raises(UnknownGenerator):
        Word.parse("f3", names)
    with pytest.raises(ValueError):
        Word.parse("f1^x", names)


def test_commutator():
    f1, f2 = Word.generator(0), Word.generator(1)
    assert commutator(f1, f2).letters == ((0, -1), (1, -1), (0, 1), (1, 1))
    assert commutator(f1 * f2, f1 * f2).is_identity
    assert commutator(Word(), f2).is_identity


def test_eval_word_translations():
    gens = translations(0.01, 0.02)
    f1 = gens.word("f1")
    assert eval_word(gens, f1, 0.995) == pytest.approx(1.005)
    assert abs(eval_word(gens, commutator(f1, gens.word("f2")), 0.0)) < 1e-12
    with pytest.raises(OutOfDomain) as info:
        eval_word(gens, f1, 1.5)
    assert info.value.letter == 0


def test_eval_word_intermediate_values_must_stay_inside():
    gens = translations(0.01)
    three = gens.word("f1^3")
    assert eval_word(gens, three, 0.97) == pytest.approx(1.0)
    with pytest.raises(OutOfDomain):
        eval_word(gens, three, 0.985)
    # an inverse letter needs its input in the image of (-1, 1)
    with pytest.raises(OutOfDomain):
        eval_word(gens, gens.word("f1^-1"), -0.995)
    assert not is_defined(gens, Word(), 1.0)


def test_eval_word_derivative():
    gens = mobius(0.02)
    w = gens.word("f1 f1")
    x = 0.3
    value, slope = eval_word_derivative(gens, w, x)
    assert value == pytest.approx(x / (1 - 0.04 * x))
    assert slope == pytest.approx(1 / (1 - 0.04 * x) ** 2)

    value, slope = eval_word_derivative(gens, ~w, value)
    assert value == pytest.approx(x, abs=1e-12)
    assert slope == pytest.approx((1 - 0.04 * x) ** 2)


@pytest.mark.parametrize("text, y, expected", [
    ("x + 0.01", 0.5, 0.49),
    ("x/(1 - 0.02*x)", 0.0, 0.0),
])
def test_invert_generator(text, y, expected):
    g = Generator.from_text("g", text)
    assert invert_generator(g, y) == pytest.approx(expected, abs=1e-12)


def test_invert_generator_quadratic_and_range():
    g = Generator.from_text("g", "x + 0.005 + 0.004*x*x")
    x = invert_generator(g, 0.2)
    assert abs(g(x) - 0.2) < 1e-12
    with pytest.raises(NotInRange):
        invert_generator(g, 1.5)


def test_word_domain():
    gens = translations(0.01, 0.02)
    assert word_domain(gens, Word()) == Interval(-1.0, 1.0)
    three = word_domain(gens, gens.word("f1^3"))
    assert three.lo == -1.0
    assert three.hi == pytest.approx(0.98, abs=1e-8)
    inverse = word_domain(gens, gens.word("f2^-1"))
    assert inverse.lo == pytest.approx(-0.98, abs=2e-6)
    assert inverse.hi == 1.0


def test_word_domain_of_commutators():
    gens = expressions("x + 0.003 + 0.002*x*x", "x/(1 - 0.008*x)")
    domain = word_domain(gens, commutator(gens.word("f1"), gens.word("f2")))
    assert domain.covers(Interval(-0.96, 0.96))


def test_eval_word_grid_marks_undefined_points():
    gens = translations(0.01)
    values = eval_word_grid(gens, gens.word("f1 f1"), [0.0, 0.995])
    assert values[0] == pytest.approx(0.02)
    assert math.isnan(values[1])


@pytest.mark.parametrize("text, expected", [
    ("x", 0.0),
    ("x + 0.003", 0.003),
])
def test_c1_distance(text, expected):
    assert c1_distance(Generator.from_text("g", text)) == pytest.approx(expected, abs=1e-15)


def test_c1_distance_is_a_grid_maximum():
    distance = c1_distance(Generator.from_text("g", "x + 0.002 + 0.001*x*x"))
    assert 0.003 - 1e-5 < distance <= 0.003


def test_generator_validation():
    with pytest.raises(InvalidGenerator):
        Generator.from_text("g", "-x")
    with pytest.raises(InvalidGenerator):
        Generator.from_text("g", "1/(x - 0.5)")
    with pytest.raises(InvalidGenerator):
        Generator.from_text("g", "x + 2")


def test_generator_set():
    gens = translations(0.01, 0.03)
    assert gens.names == ("f1", "f2")
    assert gens.epsilon == pytest.approx(0.03)
    assert gens.format(gens.word("f2^-1 f1")) == "f2^-1 f1"
    with pytest.raises(ValueError):
        GeneratorSet(())
    with pytest.raises(ValueError):
        GeneratorSet.from_expressions({"f": "x + 0.01"}, m=0)


def test_orbit_and_fundamental_intervals():
    gens = translations(0.04)
    points = orbit(gens, gens.word("f1"), 0.0, -2, 3)
    assert sorted(points) == [-2, -1, 0, 1, 2, 3]
    assert points[3] == pytest.approx(0.12)
    assert points[-2] == pytest.approx(-0.08)

    intervals = fundamental_intervals(gens, gens.word("f1"), 0.0, 2)
    assert intervals[0].empty
    assert intervals[2].lo == pytest.approx(-0.08)
    assert intervals[2].hi == pytest.approx(0.08)
    with pytest.raises(ValueError):
        fundamental_intervals(gens, gens.word("f1^-1"), 0.0, 2)
    with pytest.raises(ValueError):
        fundamental_intervals(gens, gens.word("f1"), 0.0, 0)


def _perturbed_pair(a: float, b: float, c: float) -> GeneratorSet:
    return expressions(f"x/(1 - {a!r}*x) + {c!r}", f"x + {b!r} + {c!r}*x*x")


_small = st.floats(min_value=-0.003, max_value=0.003, allow_nan=False)


@settings(max_examples=20, deadline=None)
@given(a=_small, b=_small, c=st.floats(min_value=0.0005, max_value=0.002))
def test_commutator_domain_contains_central_interval(a, b, c):
    gens = _perturbed_pair(a, b, c)
    assume(gens.epsilon < 0.01)
    domain = word_domain(gens, commutator(gens.word("f1"), gens.word("f2")))
    assert domain.covers(Interval(-0.96, 0.96))


@settings(max_examples=25, deadline=None)
@given(x=st.floats(min_value=-0.9, max_value=0.9), y=st.floats(min_value=-0.9, max_value=0.9))
def test_words_are_increasing(x, y):
    gens = expressions("x/(1 - 0.008*x)", "x + 0.003 + 0.002*x*x")
    w = gens.word("f1^-1 f2 f1 f2^-1 f2^-1")
    assume(x < y and is_defined(gens, w, x) and is_defined(gens, w, y))
    assert eval_word(gens, w, x) < eval_word(gens, w, y) or y - x < 1e-12


@settings(max_examples=25, deadline=None)
@given(x=st.floats(min_value=-0.9, max_value=0.9))
def test_inverse_word_undoes_word(x):
    gens = expressions("x/(1 - 0.008*x)", "x + 0.003 + 0.002*x*x")
    w = gens.word("f1^-1 f2 f2 f1")
    value = eval_word(gens, w, x)
    assume(-1 < value < 1 and is_defined(gens, ~w, value))
    assert eval_word(gens, ~w, value) == pytest.approx(x, abs=1e-11)


def test_fundamental_interval_geometry():
    gens = expressions("x + 0.008 + 0.001*x*x", "x + 0.003 + 0.0004*x*x")
    f1, f2 = gens.word("f1"), gens.word("f2")
    x0 = 0.1
    intervals = fundamental_intervals(gens, f1, x0, 12)
    g = commutator(f1, f2)
    for k in range(1, 9):
        for step in (f2, ~f2):
            lo, hi = eval_word(gens, step, intervals[k].lo), eval_word(gens, step, intervals[k].hi)
            assert intervals[k + 2].covers(Interval(lo, hi), tol=1e-9)
    for k in range(1, 6):
        lo, hi = eval_word(gens, g, intervals[k].lo), eval_word(gens, g, intervals[k].hi)
        assert intervals[k + 4].covers(Interval(lo, hi), tol=1e-9)


@settings(max_examples=10, deadline=None)
@given(
    s1=st.floats(min_value=0.005, max_value=0.01),
    s2=st.floats(min_value=0.001, max_value=0.004),
    q1=st.floats(min_value=0.0, max_value=0.001),
    ratio=st.floats(min_value=0.0, max_value=1.0),
    x0=st.floats(min_value=-0.2, max_value=0.2),
)
def test_fundamental_interval_geometry_of_random_pairs(s1, s2, q1, ratio, x0):
    gens = expressions(f"x + {s1!r} + {q1!r}*x*x", f"x + {s2!r} + {q1 * ratio!r}*x*x")
    f1, f2 = gens.word("f1"), gens.word("f2")
    intervals = fundamental_intervals(gens, f1, x0, 12)
    g = commutator(f1, f2)
    for k in range(1, 9):
        for step in (f2, ~f2):
            lo, hi = eval_word(gens, step, intervals[k].lo), eval_word(gens, step, intervals[k].hi)
            assert intervals[k + 2].covers(Interval(lo, hi), tol=1e-9)
    for k in range(1, 6):
        lo, hi = eval_word(gens, g, intervals[k].lo), eval_word(gens, g, intervals[k].hi)
        assert intervals[k + 4].covers(Interval(lo, hi), tol=1e-9)


def test_orbit_growth_bounds():
    gens = expressions("x + 0.008 + 0.001*x*x")
    f1 = gens.word("f1")
    x0 = 0.0
    points = orbit(gens, f1, x0, -10, 10)
    delta = points[1] - points[0]
    eps = gens.epsilon
    for k in range(-10, 10):
        step = points[k + 1] - points[k]
        assert delta * (1 - eps) ** (abs(k) + 1) < step < delta * (1 + eps) ** (abs(k) + 1)
    assert np.all(np.diff([points[k] for k in sorted(points)]) > 0)
