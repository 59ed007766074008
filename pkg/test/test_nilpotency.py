import pytest

from pseudogroup import EmptyDomain, Word, check_identity, commutator, enumerate_commutators, verify_abelian, verify_metabelian, verify_near_identity_nilpotent
from pseudogroup.nilpotency import IDENTITY_TOL, epsilon_bound

from ._common import GOLDEN, conjugated_translations, expressions, mobius, translations


def test_enumerate_order_one_pairs():
    gens = translations(0.01, 0.02, 0.03)
    enumeration = enumerate_commutators(gens, 1)
    assert [tree.label(gens.names) for tree in enumeration] == ["[f1,f2]", "[f1,f3]", "[f2,f3]"]
    assert not enumeration.truncated
    assert all(tree.order == 1 for tree in enumeration)


def test_enumerate_order_two():
    gens = translations(0.01, 0.02)
    enumeration = enumerate_commutators(gens, 2)
    assert [tree.label(gens.names) for tree in enumeration] == ["[f1,[f1,f2]]", "[f2,[f1,f2]]"]
    f1, f2 = Word.generator(0), Word.generator(1)
    assert enumeration[0].word == commutator(f1, commutator(f1, f2))
    assert enumeration[1].right.order == 1


def test_enumerate_single_generator_is_empty():
    gens = translations(0.01)
    for m in (1, 2, 3):
        assert len(enumerate_commutators(gens, m)) == 0


def test_enumerate_words_are_distinct_up_to_inversion():
    gens = translations(0.01, 0.02, 0.03)
    words = enumerate_commutators(gens, 2).words
    assert len(set(words)) == len(words)
    assert not any(~w in words for w in words if ~w != w)


def test_enumerate_truncates():
    gens = translations(0.01, 0.02, 0.03)
    enumeration = enumerate_commutators(gens, 2, max_count=4)
    assert len(enumeration) == 4
    assert enumeration.truncated
    with pytest.raises(ValueError):
        enumerate_commutators(gens, 0)


def test_check_identity_commuting_translations():
    gens = translations(0.01, 0.02)
    report = check_identity(gens, commutator(gens.word("f1"), gens.word("f2")))
    assert report.verdict
    assert report.max_deviation < 1e-10
    assert report.label == "f1^-1 f2^-1 f1 f2"
    assert report.checked_interval.lo == pytest.approx(-1 + 10 * gens.epsilon)


def test_check_identity_detects_non_commuting_pair():
    gens = expressions("x + 0.003", "x + 0.003 + 0.0005*x*x")
    report = check_identity(gens, commutator(gens.word("f1"), gens.word("f2")))
    assert not report.verdict
    assert 1e-6 < report.max_deviation < 1e-5


def test_check_identity_of_the_identity():
    gens = translations(0.01)
    report = check_identity(gens, Word())
    assert report.verdict
    assert report.max_deviation == 0.0
    assert report.sample_count == 0


def test_check_identity_empty_domain():
    gens = translations(0.2)
    with pytest.raises(EmptyDomain):
        check_identity(gens, gens.word("f1^20"))
    with pytest.raises(ValueError):
        check_identity(gens, Word(), tol=0)


def test_epsilon_threshold_gate():
    gens = translations(0.001, 0.0007)
    passing = verify_near_identity_nilpotent(gens, 1)
    assert passing.passed
    assert passing.epsilon_bound == pytest.approx(0.01)

    failing = verify_near_identity_nilpotent(gens, 2)
    assert failing.commutators_pass
    assert not failing.epsilon_within_bound
    assert not failing.passed
    assert failing.failed_words == []


def test_epsilon_bound():
    assert epsilon_bound(1) == pytest.approx(0.01)
    assert epsilon_bound(3) == pytest.approx(1e-4)


def test_verify_names_failing_commutator():
    gens = expressions("x + 0.003", "x + 0.003 + 0.0005*x*x")
    report = verify_near_identity_nilpotent(gens, 1)
    assert not report.passed
    assert report.failed_words == ["[f1,f2]"]
    assert report.max_deviation > 1e-6
    assert "FAIL" in report.summary()


@pytest.mark.parametrize("gens, expected", [
    (translations(0.01, 0.02), True),
    (mobius(0.003, 0.005), True),
    (expressions("x + 0.003", "x/(1 - 0.005*x)"), False),
])
def test_verify_abelian(gens, expected):
    abelian, report = verify_abelian(gens)
    assert abelian == expected
    assert report.claim == "abelian"


def test_verify_metabelian():
    ok, report = verify_metabelian(translations(0.01, 0.02, 0.03))
    assert ok
    assert len(report.checks) == 3

    ok, report = verify_metabelian(translations(0.01))
    assert ok
    assert report.checks == []


def test_verify_metabelian_with_extra_words():
    gens = translations(0.02, 0.01)
    extra = [(gens.word("f2^-2 f1"), "f1~")]
    ok, report = verify_metabelian(gens, extra=extra)
    assert ok
    assert [check.label for check in report.checks] == ["[[f1,f2],f1~]"]


def test_affine_pair_is_metabelian_but_not_nilpotent():
    # [f1, f2] is a translation; translations commute, but f1 rescales them
    gens = expressions("x + 0.0004*x", "x + 0.0003", m=2)
    assert not verify_abelian(gens)[0]
    assert not verify_near_identity_nilpotent(gens, 2).commutators_pass
    assert verify_metabelian(gens)[0]


def test_conjugation_keeps_abelian_verdict():
    plain = translations(0.01, 0.02)
    conjugated = conjugated_translations(0.05, 0.01, 0.02)
    assert verify_abelian(plain)[0] == verify_abelian(conjugated)[0]


def test_report_serializes():
    report = verify_near_identity_nilpotent(translations(0.01, 0.02), 1)
    data = report.model_dump(mode="json")
    assert data["passed"] is True
    assert data["checks"][0]["label"] == "[f1,f2]"
    assert "word" not in data["checks"][0]


_COMMUTING_FAMILIES = [
    translations(0.01, 0.02),
    translations(0.001, 0.0007, 0.0013),
    translations(0.004, 0.004),
    mobius(0.003, 0.005),
    mobius(0.002, 0.004, 0.007),
    expressions("x/(1 - 0.004*x)", "x/(1 + 0.004*x)"),
    expressions("x + 0.003 + 0.001*x*x", "x + 0.003 + 0.001*x*x + 0.003 + 0.001*(x + 0.003 + 0.001*x*x)^2"),
    expressions("log(exp(x) + 0.002)", "log(exp(x) + 0.003)"),
    expressions("log(exp(x) + 0.001)", "log(exp(x) + 0.0025)", "log(exp(x) - 0.0015)"),
    conjugated_translations(0.05, 0.01, 0.02),
    conjugated_translations(0.1, 0.003, 0.005, 0.007),
    expressions("x + 0.005 + 0.002*x*x"),
]


@pytest.mark.parametrize("gens", _COMMUTING_FAMILIES)
def test_nilpotent_families_are_metabelian(gens):
    assert verify_near_identity_nilpotent(gens, 1).commutators_pass
    assert verify_metabelian(gens)[0]


@pytest.mark.parametrize("gens", [
    mobius(0.003, 0.005),
    expressions("0.1234 + (x - 0.1234)/(1 - 0.003*(x - 0.1234))", "0.1234 + (x - 0.1234)/(1 - 0.005*(x - 0.1234))"),
    translations(0.02 * GOLDEN, 0.02),
    conjugated_translations(0.05, 0.01, 0.01 * GOLDEN),
])
def test_classifiable_families_are_abelian(gens):
    assert verify_abelian(gens)[0]


@pytest.mark.parametrize("gens", _COMMUTING_FAMILIES[:6])
@pytest.mark.parametrize("m", [1, 2])
def test_nilpotency_passes_at_higher_orders(gens, m):
    if not verify_near_identity_nilpotent(gens, m, IDENTITY_TOL).commutators_pass:
        pytest.skip("order m does not hold")
    assert verify_near_identity_nilpotent(gens, m + 1, 3 * IDENTITY_TOL).commutators_pass
