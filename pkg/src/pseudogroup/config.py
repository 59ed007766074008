"""
The JSON config read by the command line.

Generators are given by kind (the `kind` key, `"expr"` when missing)::

    {
        "generators": [
            {"name": "f1", "expr": "x/(1 - 0.01*x)"},
            {"kind": "translation", "name": "f2", "shift": 0.02}
        ],
        "claimed_order": 1,
        "base_segment": "blend"
    }

See docs/config-schema.md for every field.
"""
import hashlib
import logging
import re
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, FiniteFloat, PositiveFloat, PositiveInt, ValidationError, field_validator, model_validator
from typing_extensions import List, Literal, Optional, Sequence, Self, Tuple, Union

from ._registry import KindAdapter, KindModel
from .classify import CHAIN_TOL, DIVERGENCE_STEPS, FIXED_TOL, GRID, MAX_SEGMENTS, RESIDUAL_SAMPLES, SEGMENTS, BaseSegment, BlendSegment, ClassifyConfig
from .errors import ConfigError
from .expr import parse
from .nilpotency import IDENTITY_SAMPLES, IDENTITY_TOL
from .pmap import C1_SAMPLES, INVERSION_TOL, Generator, GeneratorSet
from .rotation import N_ITERS, Q_MAX

logger = logging.getLogger(__name__)


class GeneratorSpec(KindModel, discriminator="kind", default="expr"):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(pattern=r"^[A-Za-z_]\w*$")

    def expression(self) -> str:
        raise NotImplementedError

    def build(self, samples: int = 257) -> Generator:
        return Generator.from_text(self.name, self.expression(), samples=samples)


class ExprGenerator(GeneratorSpec):
    kind: Literal["expr"]
    expr: str

    @field_validator("expr")
    @classmethod
    def _parses(cls, text: str) -> str:
        parse(text)
        return text

    def expression(self) -> str:
        return self.expr


class TranslationGenerator(GeneratorSpec, value="translation"):
    """x + shift"""
    shift: FiniteFloat

    def expression(self) -> str:
        return f"x + ({self.shift!r})"


class MobiusGenerator(GeneratorSpec, value="mobius"):
    """x / (1 - a x), fixing 0 with derivative 1 there"""
    a: FiniteFloat

    def expression(self) -> str:
        return f"x / (1 - ({self.a!r}) * x)"


class PolynomialGenerator(GeneratorSpec, value="polynomial"):
    """x + c_0 + c_1 x + c_2 x^2 + ..."""
    coefficients: List[FiniteFloat] = Field(min_length=1)

    def expression(self) -> str:
        terms = ["x"]
        for k, c in enumerate(self.coefficients):
            if c == 0:
                continue
            terms.append(f"({c!r})" if k == 0 else f"({c!r}) * x" if k == 1 else f"({c!r}) * x^{k}")
        return " + ".join(terms)


class ConjugatedTranslationGenerator(GeneratorSpec, value="conjugated-translation"):
    """h^-1(h(x) + shift) with h(x) = x / (1 - a x), so h^-1(y) = y / (1 + a y)"""
    shift: FiniteFloat
    a: FiniteFloat

    def expression(self) -> str:
        moved = f"(x / (1 - ({self.a!r}) * x) + ({self.shift!r}))"
        return f"{moved} / (1 + ({self.a!r}) * {moved})"


class Tolerances(BaseModel):
    model_config = ConfigDict(extra="forbid")

    identity: PositiveFloat = IDENTITY_TOL
    inversion: PositiveFloat = INVERSION_TOL
    fixed_point: PositiveFloat = FIXED_TOL
    chain: PositiveFloat = CHAIN_TOL


class Iterations(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_iters: PositiveInt = N_ITERS
    identity_samples: PositiveInt = IDENTITY_SAMPLES
    c1_samples: PositiveInt = C1_SAMPLES
    grid: PositiveInt = GRID
    segments: PositiveInt = SEGMENTS
    max_segments: PositiveInt = MAX_SEGMENTS
    residual_samples: PositiveInt = RESIDUAL_SAMPLES
    divergence_steps: PositiveInt = DIVERGENCE_STEPS


class Config(BaseModel):
    model_config = ConfigDict(extra="forbid")

    generators: List[KindAdapter[GeneratorSpec]] = Field(min_length=1)
    claimed_order: PositiveInt = 1
    tolerances: Tolerances = Tolerances()
    iterations: Iterations = Iterations()
    q_max: PositiveInt = Q_MAX
    output_dir: Path = Path("runs")
    base_segment: KindAdapter[BaseSegment] = BlendSegment()

    @model_validator(mode="after")
    def _unique_names(self) -> Self:
        names = [g.name for g in self.generators]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ValueError(f"Generator names must be unique, got {duplicates} more than once")
        return self

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Config":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        return cls.from_json(text, source=str(path))

    @classmethod
    def from_json(cls, text: str, source: str = "<string>") -> "Config":
        try:
            config = cls.model_validate_json(text)
        except ValidationError as e:
            raise ConfigError(source, diagnostics(e, text)) from None
        logger.info("loaded config %s with %d generators", source, len(config.generators))
        return config

    def with_overrides(self, *, tol_identity: Optional[float] = None, iters: Optional[int] = None, q_max: Optional[int] = None, output_dir: Optional[Path] = None) -> "Config":
        """A copy with the command-line overrides applied and validated."""
        data = self.model_dump()
        if tol_identity is not None:
            data["tolerances"]["identity"] = tol_identity
        if iters is not None:
            data["iterations"]["n_iters"] = iters
        if q_max is not None:
            data["q_max"] = q_max
        if output_dir is not None:
            data["output_dir"] = output_dir
        return type(self).model_validate(data)

    def to_generator_set(self) -> GeneratorSet:
        generators = tuple(entry.build() for entry in self.generators)
        return GeneratorSet(generators, self.claimed_order, self.iterations.c1_samples, self.tolerances.inversion)

    def classify_config(self) -> ClassifyConfig:
        return ClassifyConfig(
            identity_tol=self.tolerances.identity,
            identity_samples=self.iterations.identity_samples,
            fixed_tol=self.tolerances.fixed_point,
            chain_tol=self.tolerances.chain,
            grid=self.iterations.grid,
            n_iters=self.iterations.n_iters,
            q_max=self.q_max,
            segments=self.iterations.segments,
            max_segments=self.iterations.max_segments,
            residual_samples=self.iterations.residual_samples,
            divergence_steps=self.iterations.divergence_steps,
            base_segment=self.base_segment,
        )

    def digest(self) -> str:
        """Short hash of everything that affects results; the output directory does not."""
        canonical = self.model_dump_json(exclude={"output_dir"})
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _locate(text: str, loc: Sequence[Union[str, int]]) -> Optional[int]:
    """1-based line of the entry at `loc`: keys are found as quoted strings, list indices by counting objects."""
    position = 0
    for part in loc:
        if isinstance(part, int):
            for _ in range(part + 1):
                found = text.find("{", position + 1 if position else 0)
                if found < 0:
                    return None
                position = found
        else:
            match = re.compile(rf'"{re.escape(part)}"\s*:').search(text, position)
            if match is None:
                # pydantic appends the kind to the location of tagged-union members
                continue
            position = match.start()
    return text.count("\n", 0, position) + 1 if loc else None


def diagnostics(error: ValidationError, text: str) -> List[str]:
    lines = []
    for item in error.errors(include_url=False):
        loc: Tuple[Union[str, int], ...] = tuple(item.get("loc", ()))
        where = ".".join(str(part) for part in loc) or "<root>"
        line = _locate(text, loc)
        prefix = f"line {line}: {where}" if line else where
        lines.append(f"{prefix}: {item['msg']}")
    return lines
