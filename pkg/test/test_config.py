import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from pseudogroup import AffineSegment, BlendSegment, Config, ConfigError
from pseudogroup.config import ConjugatedTranslationGenerator, ExprGenerator, MobiusGenerator, PolynomialGenerator, TranslationGenerator

from ._common import write_config


BASIC = {
    "generators": [
        {"name": "f1", "expr": "x/(1 - 0.003*x)"},
        {"kind": "mobius", "name": "f2", "a": 0.005},
    ],
}


def test_generator_kinds():
    config = Config.model_validate({
        "generators": [
            {"name": "e", "expr": "x + 0.01"},
            {"kind": "translation", "name": "t", "shift": 0.02},
            {"kind": "mobius", "name": "m", "a": 0.005},
            {"kind": "polynomial", "name": "p", "coefficients": [0.005, 0.0, 0.004]},
            {"kind": "conjugated-translation", "name": "c", "shift": 0.01, "a": 0.05},
        ],
    })
    kinds = [type(entry) for entry in config.generators]
    assert kinds == [ExprGenerator, TranslationGenerator, MobiusGenerator, PolynomialGenerator, ConjugatedTranslationGenerator]
    assert config.generators[0].kind == "expr"
    assert ExprGenerator.__kind_values__ == ("expr",)

    gens = config.to_generator_set()
    assert gens.names == ("e", "t", "m", "p", "c")
    assert gens[1](0.5) == pytest.approx(0.52)
    assert gens[2](0.5) == pytest.approx(0.5 / 0.9975)
    assert gens[3](0.5) == pytest.approx(0.506)
    assert gens[4](0.0) == pytest.approx(0.01 / 1.0005)


@pytest.mark.parametrize("entry, expected", [
    (TranslationGenerator(name="f", shift=0.01), "x + (0.01)"),
    (MobiusGenerator(name="f", a=0.02), "x / (1 - (0.02) * x)"),
    (PolynomialGenerator(name="f", coefficients=[0.005, 0.0, 0.004]), "x + (0.005) + (0.004) * x^2"),
    (PolynomialGenerator(name="f", coefficients=[0.0, 0.01]), "x + (0.01) * x"),
    (ExprGenerator(name="f", expr="x + 0.3"), "x + 0.3"),
])
def test_generator_expressions(entry, expected):
    assert entry.expression() == expected


def test_conjugated_translation_is_a_conjugate():
    entry = ConjugatedTranslationGenerator(name="g", shift=0.01, a=0.05)
    g = entry.build()
    for x in (-0.5, 0.0, 0.3):
        h = x / (1 - 0.05 * x)
        assert g(x) == pytest.approx((h + 0.01) / (1 + 0.05 * (h + 0.01)))


def test_base_segment_shorthands():
    assert isinstance(Config.model_validate(BASIC).base_segment, BlendSegment)
    assert isinstance(Config.model_validate({**BASIC, "base_segment": "affine"}).base_segment, AffineSegment)
    assert isinstance(Config.model_validate({**BASIC, "base_segment": {"kind": "affine"}}).base_segment, AffineSegment)
    assert isinstance(Config.model_validate({**BASIC, "base_segment": {}}).base_segment, BlendSegment)
    with pytest.raises(ValidationError):
        Config.model_validate({**BASIC, "base_segment": "spline"})


def test_invalid_expression_reports_line():
    text = '{\n  "generators": [\n    {"name": "f1", "expr": "x +"}\n  ]\n}'
    with pytest.raises(ConfigError) as info:
        Config.from_json(text, source="broken.json")
    [line] = info.value.diagnostics
    assert line.startswith("line 3: generators.0")
    assert "offset 3" in line
    assert "broken.json" in str(info.value)
    assert isinstance(info.value, ValueError)


@pytest.mark.parametrize("payload, fragment", [
    ({"generators": []}, "generators"),
    ({"generators": [{"name": "f1", "expr": "x + 0.01"}, {"name": "f1", "expr": "x + 0.02"}]}, "unique"),
    ({"generators": [{"kind": "rotation", "name": "f1", "angle": 0.1}]}, "generators.0"),
    ({"generators": [{"name": "f1", "expr": "x + 0.01", "colour": "red"}]}, "colour"),
    ({"generators": [{"name": "1f", "expr": "x + 0.01"}]}, "name"),
    ({**BASIC, "q_max": 0}, "q_max"),
    ({**BASIC, "tolerances": {"identity": -1}}, "tolerances.identity"),
])
def test_invalid_configs(payload, fragment):
    with pytest.raises(ConfigError) as info:
        Config.from_json(json.dumps(payload, indent=2))
    assert any(fragment in line for line in info.value.diagnostics)


def test_load(tmp_path: Path):
    path = write_config(tmp_path, {**BASIC, "claimed_order": 2, "iterations": {"n_iters": 500}})
    config = Config.load(path)
    assert config.claimed_order == 2
    assert config.iterations.n_iters == 500
    assert config.iterations.grid == 2001
    assert config.to_generator_set().nilpotency_order_claimed == 2
    with pytest.raises(OSError):
        Config.load(tmp_path / "missing.json")


def test_overrides():
    config = Config.model_validate(BASIC)
    changed = config.with_overrides(tol_identity=1e-6, iters=300, q_max=12, output_dir=Path("elsewhere"))
    assert changed.tolerances.identity == 1e-6
    assert changed.iterations.n_iters == 300
    assert changed.q_max == 12
    assert changed.output_dir == Path("elsewhere")
    assert config.q_max == 50
    assert config.with_overrides() == config
    with pytest.raises(ValidationError):
        config.with_overrides(iters=0)


def test_classify_config():
    config = Config.model_validate({**BASIC, "base_segment": "affine", "tolerances": {"chain": 1e-7}, "iterations": {"segments": 8}})
    classify_config = config.classify_config()
    assert classify_config.chain_tol == 1e-7
    assert classify_config.segments == 8
    assert classify_config.q_max == 50
    assert isinstance(classify_config.base_segment, AffineSegment)


def test_digest():
    config = Config.model_validate(BASIC)
    assert len(config.digest()) == 12
    assert config.digest() == Config.model_validate(json.loads(json.dumps(BASIC))).digest()
    assert config.with_overrides(output_dir=Path("other")).digest() == config.digest()
    assert config.with_overrides(q_max=10).digest() != config.digest()
