import json
from pathlib import Path

from pseudogroup import GeneratorSet
from pseudogroup.config import ConjugatedTranslationGenerator

GOLDEN = 0.6180339887


class InvalidTestStateException(Exception):
    pass


def translations(*shifts: float, m: int = 1) -> GeneratorSet:
    return GeneratorSet.from_expressions([f"x + {shift!r}" for shift in shifts], m)


def mobius(*params: float, m: int = 1) -> GeneratorSet:
    """x / (1 - a x) for each a; all of them fix 0 and commute"""
    return GeneratorSet.from_expressions([f"x/(1 - {a!r}*x)" for a in params], m)


def conjugated_translations(a: float, *shifts: float, m: int = 1) -> GeneratorSet:
    """h^-1(h(x) + shift) with h(x) = x / (1 - a x); fixed-point free and commuting"""
    texts = [ConjugatedTranslationGenerator(name=f"g{i + 1}", shift=shift, a=a).expression() for i, shift in enumerate(shifts)]
    return GeneratorSet.from_expressions(texts, m)


def expressions(*texts: str, m: int = 1) -> GeneratorSet:
    return GeneratorSet.from_expressions(list(texts), m)


def write_config(directory: Path, payload: dict, name: str = "config.json") -> Path:
    path = directory / name
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path
