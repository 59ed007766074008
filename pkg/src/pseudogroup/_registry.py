"""
Config entries that choose their implementation through a discriminator field.

A `KindModel` subclass registers itself for one or more discriminator values::

    class SegmentSpec(KindModel, discriminator="kind", default="blend"):
        ...

    class Affine(SegmentSpec, value="affine"):
        ...

Fields annotated with `KindAdapter[SegmentSpec]` then accept a registered instance, a mapping with
the discriminator (filled with the default when missing) or a registered shorthand string.
"""
import inspect

from pydantic import BaseModel, GetCoreSchemaHandler
from pydantic_core.core_schema import CoreSchema, tagged_union_schema, literal_schema, union_schema, no_info_plain_validator_function, no_info_before_validator_function, json_or_python_schema
from typing_extensions import Annotated, Any, Self, Literal, Union, ClassVar, Tuple, Set, Dict, Mapping, Type, TypeVar, TypeAlias, Collection, Callable, get_origin, get_args, TYPE_CHECKING
from propert import cached_classproperty

_KindValue: TypeAlias = str

if TYPE_CHECKING:
    _Unset = None
else:
    _Unset = object()

def ensure_kind_collection(value: _KindValue|Collection[_KindValue]) -> Tuple[_KindValue, ...]:
    if isinstance(value, str):
        return (value,)
    return tuple(value)

_CollectedChoices = Mapping[_KindValue, Collection[Type["KindModel"]]]
_CollectedShorthands = Mapping[str, "KindModel|Callable[[], KindModel]"]
_CollectedOptions = Tuple[_CollectedChoices, _CollectedShorthands]

class KindModel(BaseModel):
    __kind_values__: ClassVar[Tuple[_KindValue, ...]] = ()
    __kind_shorthands__: ClassVar[Dict[str, Any]] = {}
    __kind_discriminator__: ClassVar[str] = "kind"
    __kind_default__: ClassVar[_KindValue|None] = None
    __kind_collected__: ClassVar[_CollectedOptions|None] = None

    if not TYPE_CHECKING:
        __kind_order__: ClassVar[int]

    @cached_classproperty
    @classmethod
    def __kind_order__(cls) -> int:
        return cls.mro().index(KindModel)

    @classmethod
    def model_add_shorthand(cls, item: Self|Callable[[], Self], shorthand: str, *shorthands: str) -> None:
        for name in (shorthand, *shorthands):
            if cls.__kind_shorthands__.get(name, item) != item:
                raise ValueError(f"Shorthand {name!r} is already registered for a different item")
            cls.__kind_shorthands__[name] = item

    def model_add_as_shorthand(self, *shorthands: str) -> Self:
        if not shorthands:
            shorthands = self.__kind_values__
        if not shorthands:
            raise ValueError(f"No shorthands provided for {self!r} and no declared kind found")
        self.model_add_shorthand(self, *shorthands)
        return self

    if not TYPE_CHECKING:
        def __init__(self, *args, **kwargs):
            if self.__kind_values__:
                # the discriminator always holds a valid value, the first declared one unless given
                kwargs.setdefault(self.__kind_discriminator__, self.__kind_values__[0])
            super().__init__(*args, **kwargs)

    def __init_subclass__(cls, *,
        discriminator: str|None=None,
        value: _KindValue|Collection[_KindValue]=_Unset,
        default: _KindValue|None=None,
    **kwargs):
        cls.__kind_shorthands__ = {}
        cls.__kind_collected__ = None

        for supcls in cls.mro()[1:]:
            if issubclass(supcls, KindModel) and supcls.__kind_collected__ is not None:
                raise ValueError(f"Cannot register {cls.__name__} after the schema of {supcls.__name__} has been built; declare every kind before using it in a model")

        if discriminator is not None:
            cls.__kind_discriminator__ = discriminator
        if default is not None:
            cls.__kind_default__ = default

        values = None
        if value is not _Unset:
            values = ensure_kind_collection(value)
        else:
            values = cls._get_declared_kinds_from_annotations()
        if values is not None:
            cls.__kind_values__ = values
            cls._create_kind_annotation()

        super().__init_subclass__(**kwargs)

    @classmethod
    def _create_kind_annotation(cls):
        """Annotate the discriminator, e.g. kind="affine" -> `kind: Literal["affine"]`"""
        literal = Literal.__getitem__(cls.__kind_values__)
        if cls._get_kind_annotation() == literal:
            return
        cls.__annotations__ = {**inspect.get_annotations(cls), cls.__kind_discriminator__: literal}

    @classmethod
    def _get_kind_annotation(cls):
        try:
            return inspect.get_annotations(cls, eval_str=True).get(cls.__kind_discriminator__, None)
        except (NameError, TypeError, SyntaxError):
            return None

    @classmethod
    def _get_declared_kinds_from_annotations(cls) -> Tuple[_KindValue, ...]|None:
        annotation = cls._get_kind_annotation()
        if get_origin(annotation) is Literal:
            return tuple(get_args(annotation))
        return None

    @classmethod
    def _collect_kind_options(cls) -> _CollectedOptions:
        if cls.__kind_collected__ is not None:
            return cls.__kind_collected__

        choices: Dict[_KindValue, Set[Type[KindModel]]] = {}
        shorthands: Dict[str, Any] = dict(cls.__kind_shorthands__)
        if "__kind_values__" in cls.__dict__:
            for value in cls.__kind_values__:
                choices.setdefault(value, set()).add(cls)

        for subcls in cls.__subclasses__():
            choices_sub, shorthands_sub = subcls._collect_kind_options()
            for value, options in choices_sub.items():
                choices.setdefault(value, set()).update(options)
            for shorthand, item in shorthands_sub.items():
                if shorthands.get(shorthand, item) != item:
                    raise ValueError(f"Shorthand {shorthand!r} was given to multiple items: {item!r} and {shorthands[shorthand]!r}")
                shorthands[shorthand] = item

        cls.__kind_collected__ = choices, shorthands
        return choices, shorthands

T = TypeVar("T", bound=KindModel)

class _KindWrapper:
    def __init__(self, kind_type: Type[KindModel]):
        self._kind_type = kind_type

    def __class_getitem__(cls, item):
        if not isinstance(item, type) or not issubclass(item, KindModel):
            raise TypeError(f"KindAdapter can only be used with {KindModel.__name__} subclasses, got {item}")
        # Annotated keeps the result a valid type argument, e.g. inside List[...]
        return Annotated[item, cls(item)]

    def __get_pydantic_core_schema__(self, source, handler: GetCoreSchemaHandler) -> CoreSchema:
        kind_type = self._kind_type
        choices, shorthands = kind_type._collect_kind_options()
        discriminator = kind_type.__kind_discriminator__
        default = kind_type.__kind_default__

        def check_isinstance(v):
            # already validated instances skip the tagged union
            if isinstance(v, kind_type):
                return v
            raise ValueError(f"Value {v!r} is not a {kind_type.__name__}")

        schemas = []
        if shorthands:
            names = list(shorthands)
            def validate_shorthand(v):
                if not isinstance(v, str):
                    raise ValueError(f"Expected a shorthand string, got {v!r}")
                item = shorthands.get(v, None)
                if item is None:
                    raise ValueError(f"Unknown shorthand {v!r}, expected one of {names}")
                return item() if callable(item) else item
            schemas.append(no_info_plain_validator_function(validate_shorthand, json_schema_input_schema=literal_schema(names)))

        tagged = {}
        for value, options in choices.items():
            ordered = sorted(options, key=lambda option: option.__kind_order__, reverse=True)
            option_schemas = [handler.generate_schema(option) for option in ordered]
            tagged[value] = option_schemas[0] if len(option_schemas) == 1 else union_schema(option_schemas, mode="left_to_right")
        if tagged:
            def fill_default(v):
                if default is not None and isinstance(v, dict) and discriminator not in v:
                    return {discriminator: default, **v}
                return v
            schemas.append(no_info_before_validator_function(fill_default, tagged_union_schema(tagged, discriminator)))

        if not schemas:
            raise TypeError(f"{kind_type.__name__} has no registered kinds")
        json_schema = schemas[0] if len(schemas) == 1 else union_schema(schemas, mode="left_to_right")
        python_schema = union_schema([no_info_plain_validator_function(check_isinstance), *schemas], mode="left_to_right")
        return json_or_python_schema(json_schema, python_schema)

if TYPE_CHECKING:
    KindAdapter: TypeAlias = T
else:
    KindAdapter = _KindWrapper
