from typing import Literal

import pytest
from pydantic import BaseModel, ValidationError

from pseudogroup._registry import KindAdapter, KindModel


def test_kinds_declared_by_annotation():
    class Source(KindModel, discriminator="type"):
        pass

    class TextSource(Source):
        type: Literal["text"]
        text: str

    class NumberSource(Source, value=("number", "num")):
        number: int = 0

    class Container(BaseModel):
        source: KindAdapter[Source]

    assert TextSource(text="a").type == "text"
    assert NumberSource().type == "number"

    c1 = Container.model_validate({"source": {"type": "text", "text": "a"}})
    c2 = Container.model_validate({"source": {"type": "num", "number": 3}})
    assert isinstance(c1.source, TextSource)
    assert c1.source.text == "a"
    assert isinstance(c2.source, NumberSource)
    assert c2.source.type == "num"
    assert c2.source.number == 3

    with pytest.raises(ValidationError):
        Container.model_validate({"source": {"type": "bytes"}})


def test_shorthands():
    class Source(KindModel, discriminator="type"):
        pass

    class TextSource(Source, value="text"):
        text: str

    class NumberSource(Source, value=("number", "num")):
        number: int = 0

    EMPTY = TextSource(text="").model_add_as_shorthand()
    GREETING = TextSource(text="hello").model_add_as_shorthand("greeting", "hi")
    ZERO = NumberSource().model_add_as_shorthand()

    class Container(BaseModel):
        source: KindAdapter[Source]

    assert Container.model_validate({"source": "text"}).source == EMPTY
    assert Container.model_validate({"source": "hi"}).source == GREETING
    assert Container.model_validate({"source": "num"}).source == ZERO
    assert Container.model_validate_json('{"source": "greeting"}').source == GREETING
    assert Container(source=EMPTY).source is EMPTY

    with pytest.raises(ValidationError):
        Container.model_validate({"source": "unknown"})


def test_conflicting_shorthand():
    class Source(KindModel):
        pass

    class TextSource(Source, value="text"):
        text: str

    TextSource(text="a").model_add_as_shorthand("sh")
    TextSource(text="a").model_add_as_shorthand("sh")
    with pytest.raises(ValueError):
        TextSource(text="b").model_add_as_shorthand("sh")


def test_default_kind():
    class Segment(KindModel, discriminator="kind", default="plain"):
        width: int = 1

    class Plain(Segment, value="plain"):
        pass

    class Wide(Segment, value="wide"):
        width: int = 5

    class Container(BaseModel):
        segments: list[KindAdapter[Segment]]

    container = Container.model_validate({"segments": [{"width": 3}, {"kind": "wide"}, {}]})
    assert [type(s) for s in container.segments] == [Plain, Wide, Plain]
    assert [s.width for s in container.segments] == [3, 5, 1]
    assert Container.model_validate_json('{"segments": [{"width": 2}]}').segments == [Plain(width=2)]


def test_registration_after_use():
    class Segment(KindModel):
        pass

    class Plain(Segment, value="plain"):
        pass

    class Container(BaseModel):
        segment: KindAdapter[Segment]

    assert isinstance(Container.model_validate({"segment": {"kind": "plain"}}).segment, Plain)
    with pytest.raises(ValueError):
        class Late(Segment, value="late"):
            pass


def test_adapter_needs_kind_model():
    with pytest.raises(TypeError):
        KindAdapter[int]
