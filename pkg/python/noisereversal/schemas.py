"""
structural validation for the JSON documents noisereversal reads and writes

simple schemas
--------------

    - just a basic atomic python type (the type object itself)
        - bool
        - int (never matches a bool)
        - float (matches ints too, since JSON doesn't tell them apart)
        - str
    - asserts that the validated object is an instance

simple instance schemas
-----------------------

    - an instance of any of the atomic types
    - asserts that the validated object is equal

tuple schemas
-------------

    - a fixed-length record. JSON has no tuples, so a list of the right length
      validates too
    - pairs up the items with the sub-schemas and asserts that they all match
    - trailing sub-schemas may be OPTIONALs, in which case they don't have to
      be present

list schemas
------------

    - homogeneous lists only, so the schema list has length 0 or 1
    - an empty schema list only matches an empty list
    - if the item in the schema list is an OPTIONAL, the list may be empty

dict schemas
------------

    - keys that are instances (usually str) must be present, unless wrapped in
      OPTIONAL
    - keys that are types match any otherwise unmatched key of that type
    - any other key in the validated dict is an error. this is what rejects
      unknown keys in experiment configs

UNION, ANY, RULE
----------------

    - UNION(a, b, ...) validates if any sub-schema does
    - ANY validates everything
    - RULE(pred) validates when pred(message) is truthy

>>> class PointMessage(Message):
...     SCHEMA = {'x': float, 'y': float, OPTIONAL('label'): str}
...
>>> PointMessage({'x': 1, 'y': 2.5}).validate()
>>> PointMessage({'x': 1, 'z': 2.5}).validate()
Traceback (most recent call last):
    ...
noisereversal.schemas.PointMessage.InvalidMessage: z: unexpected key
"""

import math

from .errors import InvalidDocument


__all__ = ["Message", "OPTIONAL", "UNION", "ANY", "RULE",
        "FINITE", "NONNEGATIVE_INT", "InvalidSchema", "validate"]


_primitives = (bool, int, float, str)

class OPTIONAL(object):
    """specifies that a piece of a schema is optional in some specific contexts

    - as a dictionary key, allows that key to be left out
    - as a trailing member of a tuple schema, allows that slot to be left out
    - as the only member of a list schema, allows the message list to be empty
    """
    def __init__(self, schema):
        self.schema = schema

    def __repr__(self):
        return "<OPTIONAL (%r)>" % (self.schema,)

def _required(x):
    return not isinstance(x, OPTIONAL)

class UNION(object):
    "specify that a message may match any of the sub-schemas"
    def __init__(self, *options):
        self.options = options

    def __repr__(self):
        return "<UNION (%r)>" % (list(self.options),)

class _Any(object):
    "validates any object successfully"
    def __repr__(self):
        return "<ANY>"
ANY = _Any()

class RULE(object):
    "require that a message passes a given boolean predicate"
    def __init__(self, pred, description=None):
        self.pred = pred
        self.description = description or getattr(pred, "__name__", "rule")

    def __repr__(self):
        return "<RULE (%s)>" % self.description


def _is_finite_number(x):
    return (isinstance(x, (int, float)) and not isinstance(x, bool)
            and math.isfinite(x))

def _is_nonnegative_int(x):
    return isinstance(x, int) and not isinstance(x, bool) and x >= 0

FINITE = RULE(_is_finite_number, "finite number")
NONNEGATIVE_INT = RULE(_is_nonnegative_int, "nonnegative integer")


##
## Validation
##

def _join(path, key):
    if isinstance(key, int):
        return "%s[%d]" % (path, key)
    return "%s.%s" % (path, key) if path else str(key)

def _fail(path, why):
    return False, (path, why)

def _validate_simple(schema, message, path):
    if schema is int and isinstance(message, bool):
        return _fail(path, "expected int, got bool")
    if schema is float:
        if isinstance(message, (int, float)) and not isinstance(message, bool):
            return True, None
        return _fail(path, "expected number, got %s" % type(message).__name__)
    if isinstance(message, schema):
        return True, None
    return _fail(path, "expected %s, got %s" %
            (schema.__name__, type(message).__name__))

def _validate_simple_instance(schema, message, path):
    if type(schema) is type(message) and schema == message:
        return True, None
    return _fail(path, "expected %r" % (schema,))

def _validate_tuple(schema, message, path):
    if not isinstance(message, (tuple, list)):
        return _fail(path, "expected a record")

    required = sum(1 for s in schema if _required(s))
    if not required <= len(message) <= len(schema):
        return _fail(path, "expected %d to %d items, got %d" %
                (required, len(schema), len(message)))

    for i, (sub_schema, sub_message) in enumerate(zip(schema, message)):
        if isinstance(sub_schema, OPTIONAL):
            sub_schema = sub_schema.schema
        matched, info = _validate(sub_schema, sub_message, _join(path, i))
        if not matched:
            return False, info

    return True, None

def _validate_list(schema, message, path):
    if not isinstance(message, list):
        return _fail(path, "expected a list")

    if not schema:
        if message:
            return _fail(path, "expected an empty list")
        return True, None

    sub_schema = schema[0]
    if isinstance(sub_schema, OPTIONAL):
        sub_schema = sub_schema.schema
    elif not message:
        return _fail(path, "expected a non-empty list")

    for i, sub_message in enumerate(message):
        matched, info = _validate(sub_schema, sub_message, _join(path, i))
        if not matched:
            return False, info

    return True, None

def _validate_dict(schema, message, path):
    if not isinstance(message, dict):
        return _fail(path, "expected an object")

    exact = {}
    wildcards = {}
    required = set()
    for key, sub_schema in schema.items():
        if isinstance(key, OPTIONAL):
            exact[key.schema] = sub_schema
        elif key in _primitives:
            wildcards[key] = sub_schema
        else:
            exact[key] = sub_schema
            required.add(key)

    missing = sorted(required - set(message), key=str)
    if missing:
        return _fail(_join(path, missing[0]), "missing key")

    for key in sorted(message, key=str):
        if key in exact:
            sub_schema = exact[key]
        elif type(key) in wildcards:
            sub_schema = wildcards[type(key)]
        else:
            return _fail(_join(path, key), "unexpected key")

        matched, info = _validate(sub_schema, message[key], _join(path, key))
        if not matched:
            return False, info

    return True, None

def _validate_union(schema, message, path):
    for sub_schema in schema.options:
        matched, info = _validate(sub_schema, message, path)
        if matched:
            return True, None
    return _fail(path, "matched none of %r" % (schema,))

def _validate_any(schema, message, path):
    return True, None

def _validate_rule(schema, message, path):
    try:
        ok = schema.pred(message)
    except (TypeError, ValueError):
        ok = False
    if ok:
        return True, None
    return _fail(path, "expected %s" % schema.description)

_validators = {
    bool: _validate_simple_instance,
    int: _validate_simple_instance,
    float: _validate_simple_instance,
    str: _validate_simple_instance,
    type: _validate_simple,
    tuple: _validate_tuple,
    list: _validate_list,
    dict: _validate_dict,
    UNION: _validate_union,
    _Any: _validate_any,
    RULE: _validate_rule,
}

def _validate(schema, message, path=""):
    return _validators[type(schema)](schema, message, path)


##
## Validation of the Schema itself
##

def _validate_simple_instance_schema(schema):
    return True, None

def _validate_simple_schema(schema):
    if schema in _primitives:
        return True, None
    return False, schema

def _validate_tuple_schema(schema):
    seen_optional = False
    for sub_schema in schema:
        if isinstance(sub_schema, OPTIONAL):
            seen_optional = True
            sub_schema = sub_schema.schema
        elif seen_optional:
            # OPTIONALs must trail so the slots can be matched up
            return False, schema
        valid, info = _validate_schema(sub_schema)
        if not valid:
            return False, info
    return True, None

def _validate_list_schema(schema):
    if not schema:
        return True, None

    if len(schema) != 1:
        return False, schema

    sub_schema = schema[0]
    if isinstance(sub_schema, OPTIONAL):
        sub_schema = sub_schema.schema

    return _validate_schema(sub_schema)

def _validate_dict_schema(schema):
    for key in schema:
        if isinstance(key, OPTIONAL):
            key = key.schema

        if isinstance(key, _primitives) or key in _primitives:
            continue

        return False, schema

    for sub_schema in schema.values():
        valid, info = _validate_schema(sub_schema)
        if not valid:
            return False, info

    return True, None

def _validate_union_schema(schema):
    for sub_schema in schema.options:
        valid, info = _validate_schema(sub_schema)
        if not valid:
            return False, info
    return True, None

def _validate_any_schema(schema):
    return True, None

def _validate_rule_schema(schema):
    if callable(getattr(schema, "pred", None)):
        return True, None
    return False, schema

_schema_validators = {
    bool: _validate_simple_instance_schema,
    int: _validate_simple_instance_schema,
    float: _validate_simple_instance_schema,
    str: _validate_simple_instance_schema,
    type: _validate_simple_schema,
    tuple: _validate_tuple_schema,
    list: _validate_list_schema,
    dict: _validate_dict_schema,
    UNION: _validate_union_schema,
    _Any: _validate_any_schema,
    RULE: _validate_rule_schema,
}

def _validate_schema(schema):
    schema_type = type(schema)
    if schema_type not in _schema_validators:
        return False, schema
    return _schema_validators[schema_type](schema)


def validate(schema, message):
    """validate `message` against `schema`, raising InvalidDocument

    the exception's `path` attribute names the first offending element
    """
    matched, info = _validate(schema, message)
    if not matched:
        raise InvalidDocument(info[1], info[0])


##
## the schema metaclass
##

class InvalidSchema(TypeError):
    pass


class _validated_schema(type):
    def __init__(cls, *args, **kwargs):
        super(_validated_schema, cls).__init__(*args, **kwargs)
        if hasattr(cls, "SCHEMA"):
            valid, info = _validate_schema(cls.SCHEMA)
            if not valid:
                raise InvalidSchema(info)

        cls.InvalidMessage = type('InvalidMessage', (InvalidDocument,), {
            '__module__': cls.__module__,
            '__qualname__': cls.__qualname__ + '.InvalidMessage',
        })

class Message(object, metaclass=_validated_schema):
    def __init__(self, message):
        self.message = message
        self._validation = None

    def validate(self):
        if self._validation is None:
            self._validation = _validate(self.SCHEMA, self.message)
        if not self._validation[0]:
            path, why = self._validation[1]
            raise self.InvalidMessage(why, path)
