"""Attribute universe, attribute lists and AND-of-subsets access policies.

Values are addressed internally by ``(attribute, value)`` index pairs,
both 0-based. Labels only matter at the JSON boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence


class AttributeSpecError(ValueError):
    """Base for ingestion errors."""

    code = "attribute-error"


class DuplicateLabelError(AttributeSpecError):
    code = "duplicate-label"


class EmptyValueSetError(AttributeSpecError):
    code = "empty-value-set"


class UnknownLabelError(AttributeSpecError):
    code = "unknown-label"


class ArityError(AttributeSpecError):
    code = "wrong-arity"


class UniverseMismatchError(AttributeSpecError):
    code = "universe-mismatch"


@dataclass(frozen=True)
class AttributeUniverse:
    names: tuple[str, ...]
    values: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.values:
            raise EmptyValueSetError("universe needs at least one attribute")
        if len(self.names) != len(self.values):
            raise ArityError("one name per attribute")
        if len(set(self.names)) != len(self.names):
            raise DuplicateLabelError("attribute names must be unique")
        for name, vals in zip(self.names, self.values):
            if not vals:
                raise EmptyValueSetError(f"attribute {name!r} has no values")
            if len(set(vals)) != len(vals):
                raise DuplicateLabelError(f"duplicate value label in attribute {name!r}")

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "AttributeUniverse":
        """Anonymous universe with labels ``v{l}_{t}`` (1-based, as in the literature)."""
        return cls(
            names=tuple(f"A{l + 1}" for l in range(len(sizes))),
            values=tuple(tuple(f"v{l + 1}_{t + 1}" for t in range(k)) for l, k in enumerate(sizes)),
        )

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.values)

    @property
    def m(self) -> int:
        return sum(self.sizes)

    def index(self, attr: int, label: str) -> int:
        try:
            return self.values[attr].index(label)
        except ValueError:
            raise UnknownLabelError(
                f"unknown value {label!r} for attribute {self.names[attr]!r}"
            ) from None

    def to_json(self) -> dict:
        return {
            "attributes": [
                {"name": name, "values": list(vals)} for name, vals in zip(self.names, self.values)
            ]
        }


@dataclass(frozen=True)
class AttributeList:
    """One chosen value index per attribute."""

    sizes: tuple[int, ...]
    choice: tuple[int, ...]

    def __post_init__(self):
        if len(self.choice) != len(self.sizes):
            raise ArityError(f"expected {len(self.sizes)} values, got {len(self.choice)}")
        for t, k in zip(self.choice, self.sizes):
            if not 0 <= t < k:
                raise UnknownLabelError(f"value index {t} out of range 0..{k - 1}")

    @property
    def n(self) -> int:
        return len(self.choice)


@dataclass(frozen=True)
class AccessPolicy:
    """Allowed value indices per attribute; every slot must be non-empty."""

    sizes: tuple[int, ...]
    allowed: tuple[frozenset[int], ...]

    def __post_init__(self):
        if len(self.allowed) != len(self.sizes):
            raise ArityError(f"expected {len(self.sizes)} slots, got {len(self.allowed)}")
        for l, (slot, k) in enumerate(zip(self.allowed, self.sizes)):
            if not slot:
                raise EmptyValueSetError(f"policy slot {l} is empty")
            if any(not 0 <= t < k for t in slot):
                raise UnknownLabelError(f"policy slot {l} references a value outside 0..{k - 1}")

    @classmethod
    def allow_all(cls, sizes: Sequence[int]) -> "AccessPolicy":
        return cls(tuple(sizes), tuple(frozenset(range(k)) for k in sizes))

    @classmethod
    def of(cls, sizes: Sequence[int], allowed: Sequence[Sequence[int]]) -> "AccessPolicy":
        return cls(tuple(sizes), tuple(frozenset(s) for s in allowed))


def satisfies(attrs: AttributeList, policy: AccessPolicy) -> bool:
    if attrs.sizes != policy.sizes:
        raise UniverseMismatchError("attribute list and policy use different universes")
    return all(t in slot for t, slot in zip(attrs.choice, policy.allowed))


def _load(obj):
    if isinstance(obj, (str, bytes)):
        return json.loads(obj)
    return obj


def parse_universe(obj) -> AttributeUniverse:
    doc = _load(obj)
    try:
        attrs = doc["attributes"]
        names = tuple(str(a["name"]) for a in attrs)
        values = tuple(tuple(str(v) for v in a["values"]) for a in attrs)
    except (KeyError, TypeError) as exc:
        raise AttributeSpecError(f"malformed universe document: {exc}") from None
    return AttributeUniverse(names, values)


def parse_policy(universe: AttributeUniverse, obj) -> AccessPolicy:
    doc = _load(obj)
    rows = doc.get("allow") if isinstance(doc, Mapping) else None
    if not isinstance(rows, list):
        raise AttributeSpecError('policy document needs an "allow" list')
    if len(rows) != universe.n:
        raise ArityError(f"policy has {len(rows)} slots, universe has {universe.n} attributes")
    allowed = []
    for l, row in enumerate(rows):
        if isinstance(row, str):
            row = [row]
        idx = [universe.index(l, label) for label in row]
        if len(set(idx)) != len(idx):
            raise DuplicateLabelError(f"policy slot {l} repeats a value")
        allowed.append(frozenset(idx))
    return AccessPolicy(universe.sizes, tuple(allowed))


def parse_list(universe: AttributeUniverse, obj) -> AttributeList:
    doc = _load(obj)
    rows = doc.get("choose") if isinstance(doc, Mapping) else None
    if not isinstance(rows, list):
        raise AttributeSpecError('attribute list document needs a "choose" list')
    if len(rows) != universe.n:
        raise ArityError(f"list names {len(rows)} values, universe has {universe.n} attributes")
    choice = []
    for l, label in enumerate(rows):
        if not isinstance(label, str):
            raise ArityError(f"attribute {universe.names[l]!r} must get exactly one value")
        choice.append(universe.index(l, label))
    return AttributeList(universe.sizes, tuple(choice))
