"""pseudogroup: near-identity nilpotent pseudogroups of (-1, 1), their translation numbers and classification."""
from ._consts import version as __version__
from .errors import (
    PseudogroupError, ParseError, DomainError, OutOfDomain, NotInRange, EmptyDomain, NotDegreeOne, FixedPointInput,
    CommutatorNotFixed, IterationEscaped, EstimatorDivergence, ResolutionFailure, RationalityMismatch, ChainInconsistent,
    AmbiguousResolution, HypothesisFailure, UnknownGenerator, InvalidGenerator, ConfigError,
)
from .expr import parse, to_text, evaluate, evaluate_many, differentiate
from .pmap import Interval, Generator, GeneratorSet, Word, eval_word, eval_word_derivative, is_defined, word_domain, commutator, c1_distance, orbit, fundamental_intervals
from .nilpotency import CommutatorTree, IdentityCheckReport, NilpotencyReport, enumerate_commutators, check_identity, verify_near_identity_nilpotent, verify_abelian, verify_metabelian
from .rotation import DegreeOneMap, RotationEstimate, rotation_number, relative_translation_number, circle_lift, rational_identify
from .classify import (
    FixedPointSet, InvariantSetApprox, SampledMonotoneMap, Linearization, SemiConjugacy, PeriodicChain, ReducedFamily,
    ClassifyConfig, ClassificationReport, AffineSegment, BlendSegment, BaseSegment,
    fixed_points, common_fixed_points, complementary_intervals, invariant_commuting_set, linearize, build_semi_conjugacy,
    maximal_move, classify_point, find_periodic_chain, stabilizer_reduction, classify,
)
from .config import Config

__all__ = [
    "__version__",
    "PseudogroupError", "ParseError", "DomainError", "OutOfDomain", "NotInRange", "EmptyDomain", "NotDegreeOne", "FixedPointInput",
    "CommutatorNotFixed", "IterationEscaped", "EstimatorDivergence", "ResolutionFailure", "RationalityMismatch", "ChainInconsistent",
    "AmbiguousResolution", "HypothesisFailure", "UnknownGenerator", "InvalidGenerator", "ConfigError",
    "parse", "to_text", "evaluate", "evaluate_many", "differentiate",
    "Interval", "Generator", "GeneratorSet", "Word", "eval_word", "eval_word_derivative", "is_defined", "word_domain", "commutator", "c1_distance", "orbit", "fundamental_intervals",
    "CommutatorTree", "IdentityCheckReport", "NilpotencyReport", "enumerate_commutators", "check_identity", "verify_near_identity_nilpotent", "verify_abelian", "verify_metabelian",
    "DegreeOneMap", "RotationEstimate", "rotation_number", "relative_translation_number", "circle_lift", "rational_identify",
    "FixedPointSet", "InvariantSetApprox", "SampledMonotoneMap", "Linearization", "SemiConjugacy", "PeriodicChain", "ReducedFamily",
    "ClassifyConfig", "ClassificationReport", "AffineSegment", "BlendSegment", "BaseSegment",
    "fixed_points", "common_fixed_points", "complementary_intervals", "invariant_commuting_set", "linearize", "build_semi_conjugacy",
    "maximal_move", "classify_point", "find_periodic_chain", "stabilizer_reduction", "classify",
    "Config",
]
