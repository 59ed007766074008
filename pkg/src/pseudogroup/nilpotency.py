"""
Commutators by order and the sampled identity checks behind the nilpotent, abelian and metabelian verdicts.

Identity checks are heuristic: a word is compared with the identity on a grid of its domain clipped to
(-1 + 10 eps, 1 - 10 eps), never certified.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field
from typing_extensions import Iterator, List, Literal, Optional, Sequence, Tuple, Union

from ._parallel import thread_map
from .errors import EmptyDomain
from .pmap import GeneratorSet, Interval, Word, commutator, eval_word_grid, word_domain

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-8
IDENTITY_SAMPLES = 2048
MAX_COMMUTATORS = 1000


@dataclass(frozen=True)
class CommutatorTree:
    """[left, right]; generators appear as their index."""
    word: Word
    order: int
    left: Union[int, "CommutatorTree"]
    right: Union[int, "CommutatorTree"]

    def label(self, names: Sequence[str]) -> str:
        def part(child: Union[int, CommutatorTree]) -> str:
            return names[child] if isinstance(child, int) else child.label(names)
        return f"[{part(self.left)},{part(self.right)}]"


@dataclass(frozen=True)
class CommutatorEnumeration:
    trees: Tuple[CommutatorTree, ...]
    truncated: bool = False

    def __iter__(self) -> Iterator[CommutatorTree]:
        return iter(self.trees)

    def __len__(self) -> int:
        return len(self.trees)

    def __getitem__(self, index: int) -> CommutatorTree:
        return self.trees[index]

    @property
    def words(self) -> List[Word]:
        return [tree.word for tree in self.trees]


class _Collector:
    def __init__(self, max_count: int):
        self.max_count = max_count
        self.seen = set()
        self.trees: List[CommutatorTree] = []
        self.truncated = False

    def add(self, tree: CommutatorTree) -> bool:
        """False once the cap is reached."""
        if tree.word.is_identity or tree.word in self.seen or ~tree.word in self.seen:
            return True
        if len(self.trees) >= self.max_count:
            self.truncated = True
            return False
        self.seen.add(tree.word)
        self.trees.append(tree)
        return True


def enumerate_commutators(gens: GeneratorSet, m: int, max_count: int = MAX_COMMUTATORS) -> CommutatorEnumeration:
    """
    All commutators of order `m`: [f_i, f_j] for i < j at order 1, then [g1, g2] with g2 of order m - 1
    and g1 a generator or a commutator of lower order. Words reducing to the identity are dropped, and a
    word is kept only once up to inversion ([a, b] is the inverse of [b, a]).
    """
    if m < 1:
        raise ValueError(f"Commutator order must be positive, got {m}")
    if max_count < 1:
        raise ValueError(f"max_count must be positive, got {max_count}")

    n = len(gens)
    truncated = False
    first = _Collector(max_count)
    for i in range(n):
        for j in range(i + 1, n):
            tree = CommutatorTree(commutator(Word.generator(i), Word.generator(j)), 1, i, j)
            if not first.add(tree):
                break
    truncated |= first.truncated
    levels = [first.trees]

    for order in range(2, m + 1):
        lefts: List[Union[int, CommutatorTree]] = list(range(n))
        for level in levels:
            lefts.extend(level)
        collector = _Collector(max_count)
        full = False
        for left in lefts:
            left_word = Word.generator(left) if isinstance(left, int) else left.word
            for right in levels[-1]:
                if not collector.add(CommutatorTree(commutator(left_word, right.word), order, left, right)):
                    full = True
                    break
            if full:
                break
        truncated |= collector.truncated
        levels.append(collector.trees)

    if truncated:
        logger.warning("Commutator enumeration of order %d truncated at %d words", m, max_count)
    return CommutatorEnumeration(tuple(levels[-1]), truncated)


class IdentityCheckReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    word: Word = Field(exclude=True)
    label: str
    checked_interval: Interval
    max_deviation: float
    worst_x: Optional[float] = None
    sample_count: int
    tol: float
    verdict: bool


def _checked_interval(gens: GeneratorSet, w: Word) -> Interval:
    margin = 10 * gens.epsilon
    return word_domain(gens, w).intersect(Interval(-1 + margin, 1 - margin))


def check_identity(gens: GeneratorSet, w: Word, tol: float = IDENTITY_TOL, n_samples: int = IDENTITY_SAMPLES, *, label: str|None = None) -> IdentityCheckReport:
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    label = label or gens.format(w)
    margin = 10 * gens.epsilon
    if w.is_identity:
        return IdentityCheckReport(word=w, label=label, checked_interval=Interval(-1 + margin, 1 - margin), max_deviation=0.0, sample_count=0, tol=tol, verdict=True)

    checked = _checked_interval(gens, w)
    if checked.empty:
        raise EmptyDomain(f"{label} has no points in {checked} to check")
    xs = checked.grid(n_samples)
    deviations = np.abs(eval_word_grid(gens, w, xs) - xs)
    defined = ~np.isnan(deviations)
    if not defined.any():
        raise EmptyDomain(f"{label} is undefined on every sample of {checked}")
    worst = int(np.nanargmax(deviations))
    max_deviation = float(deviations[worst])
    report = IdentityCheckReport(
        word=w, label=label, checked_interval=checked, max_deviation=max_deviation, worst_x=float(xs[worst]),
        sample_count=int(defined.sum()), tol=tol, verdict=max_deviation < tol,
    )
    logger.debug("%s on %s: max deviation %.3e (%s)", label, checked, max_deviation, "identity" if report.verdict else "not identity")
    return report


Claim = Literal["nilpotent", "abelian", "metabelian"]


class NilpotencyReport(BaseModel):
    claim: Claim
    claimed_order: Optional[int] = None
    epsilon: float
    c1_samples: int
    epsilon_bound: Optional[float] = None
    epsilon_within_bound: Optional[bool] = None
    tol: float
    checks: List[IdentityCheckReport] = []
    truncated: bool = False
    commutators_pass: bool

    @computed_field
    @property
    def passed(self) -> bool:
        return self.commutators_pass and self.epsilon_within_bound is not False

    @computed_field
    @property
    def failed_words(self) -> List[str]:
        return [check.label for check in self.checks if not check.verdict]

    @property
    def max_deviation(self) -> float:
        return max((check.max_deviation for check in self.checks), default=0.0)

    def summary(self) -> str:
        parts = [f"{self.claim}: {'pass' if self.passed else 'FAIL'}", f"epsilon={self.epsilon:.3g}"]
        if self.epsilon_bound is not None:
            parts.append(f"bound={self.epsilon_bound:.3g} ({'ok' if self.epsilon_within_bound else 'exceeded'})")
        if self.failed_words:
            parts.append("failed " + ", ".join(self.failed_words))
        return "; ".join(parts)


def epsilon_bound(m: int) -> float:
    """1 / 10^(m + 1)"""
    return 10.0 ** -(m + 1)


def _within(epsilon: float, bound: float) -> bool:
    # strict: an epsilon equal to the bound up to rounding does not pass
    return epsilon < bound and not math.isclose(epsilon, bound, rel_tol=1e-9)


def _run_checks(gens: GeneratorSet, labelled: Sequence[Tuple[Word, str]], tol: float, n_samples: int) -> List[IdentityCheckReport]:
    return thread_map(lambda item: check_identity(gens, item[0], tol, n_samples, label=item[1]), labelled)


def verify_near_identity_nilpotent(gens: GeneratorSet, m: int|None = None, tol: float = IDENTITY_TOL, n_samples: int = IDENTITY_SAMPLES, max_count: int = MAX_COMMUTATORS, *, claim: Claim = "nilpotent") -> NilpotencyReport:
    """
    Checks eps < 1/10^(m + 1) and that every order-`m` commutator is the identity.
    Higher orders follow: their right child is an order-`m` commutator, and [g, id] = id.
    """
    m = gens.nilpotency_order_claimed if m is None else m
    if m < 1:
        raise ValueError(f"Nilpotency order must be positive, got {m}")
    bound = epsilon_bound(m)
    within = _within(gens.epsilon, bound)
    if not within:
        logger.warning("epsilon %.6g is not below 1/10^%d = %.3g", gens.epsilon, m + 1, bound)

    enumeration = enumerate_commutators(gens, m, max_count)
    checks = _run_checks(gens, [(tree.word, tree.label(gens.names)) for tree in enumeration], tol, n_samples)
    report = NilpotencyReport(
        claim=claim, claimed_order=m, epsilon=gens.epsilon, c1_samples=gens.c1_samples,
        epsilon_bound=bound, epsilon_within_bound=within, tol=tol, checks=checks,
        truncated=enumeration.truncated, commutators_pass=all(check.verdict for check in checks),
    )
    logger.info(report.summary())
    return report


def verify_abelian(gens: GeneratorSet, tol: float = IDENTITY_TOL, n_samples: int = IDENTITY_SAMPLES) -> Tuple[bool, NilpotencyReport]:
    """Whether all generators commute; the eps < 1/100 check is recorded in the report, not in the verdict."""
    report = verify_near_identity_nilpotent(gens, 1, tol, n_samples, claim="abelian")
    return report.commutators_pass, report


def verify_metabelian(gens: GeneratorSet, tol: float = IDENTITY_TOL, n_samples: int = IDENTITY_SAMPLES, extra: Sequence[Tuple[Word, str]] = ()) -> Tuple[bool, NilpotencyReport]:
    """
    Whether all order-1 commutators commute with each other. `extra` words (with labels) join the
    commutators, e.g. a stabilizer family that should commute with them and among itself.
    """
    members = [(tree.word, tree.label(gens.names)) for tree in enumerate_commutators(gens, 1)]
    members.extend(extra)
    pairs = []
    for i, (u, u_label) in enumerate(members):
        for v, v_label in members[i + 1:]:
            pairs.append((commutator(u, v), f"[{u_label},{v_label}]"))
    checks = _run_checks(gens, pairs, tol, n_samples)
    report = NilpotencyReport(
        claim="metabelian", epsilon=gens.epsilon, c1_samples=gens.c1_samples, tol=tol, checks=checks,
        commutators_pass=all(check.verdict for check in checks),
    )
    logger.info(report.summary())
    return report.commutators_pass, report
