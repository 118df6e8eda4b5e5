"""Problem data for the chance-constrained multiple-choice knapsack.

An :class:`Instance` groups items into classes; exactly one item must be
picked per class.  Every item has a fixed cost and ``L`` observed weight
samples.  Samples are kept both in their original order and sorted
descending (stable, ties broken by original index), because the exact
evaluator and the fast screening test both walk the descending order.

Instances are immutable once built and are safe to share between workers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Any, Iterable, Sequence

import numpy as np

__all__ = [
    "InstanceError",
    "ParseError",
    "ValidationError",
    "SolutionError",
    "Item",
    "Instance",
    "Solution",
    "load_instance",
    "loads_instance",
    "dump_instance",
    "dumps_instance",
    "load_solution",
    "dumps_solution",
    "total_cost",
    "validate_solution",
    "check_nontrivial",
]


class InstanceError(ValueError):
    """Base class for malformed instance or solution data."""


class ParseError(InstanceError):
    """The document is not well-formed."""


class ValidationError(InstanceError):
    """The document parsed but breaks an invariant.

    ``path`` names the offending field, e.g. ``classes[2][0].samples``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class SolutionError(InstanceError):
    """A solution does not fit the instance it is applied to."""

    def __init__(self, message: str, class_index: int | None = None):
        super().__init__(message)
        self.class_index = class_index


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Item:
    cost: float
    samples: np.ndarray
    samples_desc: np.ndarray = field(repr=False)

    @classmethod
    def from_samples(cls, cost: float, samples: Iterable[float]) -> "Item":
        s = np.array(list(samples) if not isinstance(samples, np.ndarray) else samples,
                     dtype=np.float64)
        # stable sort on the negated values keeps original order among ties
        order = np.argsort(-s, kind="stable")
        return cls(float(cost), _frozen(s), _frozen(s[order].copy()))

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def std(self) -> float:
        return float(self.samples.std())


@dataclass(frozen=True, eq=False)
class Instance:
    """A validated problem instance.

    ``classes[i][j]`` is item ``j`` of class ``i``.  ``capacity`` is the
    weight limit W and ``confidence_level`` the required probability P0.
    """

    classes: tuple[tuple[Item, ...], ...]
    capacity: float
    confidence_level: float
    name: str = ""

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def sample_count(self) -> int:
        return int(self.classes[0][0].samples.shape[0])

    @property
    def class_sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.classes)

    @property
    def max_class_size(self) -> int:
        return max(self.class_sizes)

    @cached_property
    def costs(self) -> tuple[np.ndarray, ...]:
        return tuple(_frozen(np.array([it.cost for it in c])) for c in self.classes)

    @cached_property
    def desc(self) -> tuple[np.ndarray, ...]:
        """Per class, an ``(n_i, L)`` array of descending samples."""
        return tuple(_frozen(np.stack([it.samples_desc for it in c])) for c in self.classes)

    @cached_property
    def means(self) -> tuple[np.ndarray, ...]:
        return tuple(_frozen(np.array([it.mean for it in c])) for c in self.classes)

    @cached_property
    def stds(self) -> tuple[np.ndarray, ...]:
        return tuple(_frozen(np.array([it.std for it in c])) for c in self.classes)

    def picked_desc(self, solution: "Solution") -> np.ndarray:
        """``(m, L)`` matrix of descending samples of the picked items."""
        return np.stack([self.desc[i][j] for i, j in enumerate(solution.picks)])

    def picked_samples(self, solution: "Solution") -> np.ndarray:
        return np.stack([self.classes[i][j].samples for i, j in enumerate(solution.picks)])

    def with_capacity(self, capacity: float) -> "Instance":
        return Instance(self.classes, float(capacity), self.confidence_level, self.name)

    def nontrivial_band(self) -> tuple[float, float]:
        """Capacity band outside which the problem is trivial."""
        lo = sum(float(d[:, -1].min()) for d in self.desc)
        hi = sum(float(d[:, 0].max()) for d in self.desc)
        return lo, hi

    def to_dict(self) -> dict[str, Any]:
        return {
            "m": self.num_classes,
            "W": self.capacity,
            "P0": self.confidence_level,
            "L": self.sample_count,
            "classes": [
                [{"cost": it.cost, "samples": it.samples.tolist()} for it in c]
                for c in self.classes
            ],
        }


def check_nontrivial(instance: Instance) -> None:
    """Raise :class:`ValidationError` unless min-sum <= W <= max-sum."""
    lo, hi = instance.nontrivial_band()
    if instance.capacity < lo:
        raise ValidationError(
            "W", f"non-triviality violated: capacity {instance.capacity} below "
                 f"sum of per-class minima {lo}")
    if instance.capacity > hi:
        raise ValidationError(
            "W", f"non-triviality violated: capacity {instance.capacity} above "
                 f"sum of per-class maxima {hi}")


def _validate(inst: Instance) -> None:
    if len(inst.classes) == 0:
        raise ValidationError("classes", "at least one class is required")
    if not (0.0 < inst.confidence_level < 1.0):
        raise ValidationError("P0", "confidence level must lie in (0, 1)")
    if not (math.isfinite(inst.capacity) and inst.capacity >= 0):
        raise ValidationError("W", "capacity must be a finite nonnegative number")
    L = None
    for i, cls in enumerate(inst.classes):
        if len(cls) == 0:
            raise ValidationError(f"classes[{i}]", "class has no items")
        for j, it in enumerate(cls):
            path = f"classes[{i}][{j}]"
            if not (math.isfinite(it.cost) and it.cost >= 0):
                raise ValidationError(f"{path}.cost", "cost must be finite and nonnegative")
            s = it.samples
            if s.ndim != 1 or s.shape[0] == 0:
                raise ValidationError(f"{path}.samples", "need a non-empty list of samples")
            if L is None:
                L = s.shape[0]
            elif s.shape[0] != L:
                raise ValidationError(
                    f"{path}.samples", f"expected {L} samples, got {s.shape[0]}")
            if not np.all(np.isfinite(s)) or np.any(s < 0):
                raise ValidationError(f"{path}.samples",
                                      "samples must be finite and nonnegative")
            if np.any(np.diff(it.samples_desc) > 0):
                raise ValidationError(f"{path}.samples_desc", "not sorted descending")
    check_nontrivial(inst)


_KEYS = {"m", "W", "P0", "L", "classes"}


def _expect(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ValidationError(path, msg)


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def instance_from_dict(doc: Any, name: str = "") -> Instance:
    _expect(isinstance(doc, dict), "$", "top level must be an object")
    unknown = set(doc) - _KEYS
    _expect(not unknown, "$", f"unknown keys {sorted(unknown)}")
    missing = _KEYS - set(doc)
    _expect(not missing, "$", f"missing keys {sorted(missing)}")
    m, W, P0, L, raw = doc["m"], doc["W"], doc["P0"], doc["L"], doc["classes"]
    _expect(isinstance(m, int) and not isinstance(m, bool) and m >= 1, "m",
            "must be a positive integer")
    _expect(isinstance(L, int) and not isinstance(L, bool) and L >= 1, "L",
            "must be a positive integer")
    _expect(_is_number(W), "W", "must be a number")
    _expect(_is_number(P0), "P0", "must be a number")
    _expect(isinstance(raw, list), "classes", "must be an array")
    _expect(len(raw) == m, "classes", f"expected {m} classes, got {len(raw)}")
    classes = []
    for i, cls in enumerate(raw):
        _expect(isinstance(cls, list), f"classes[{i}]", "must be an array of items")
        _expect(len(cls) > 0, f"classes[{i}]", "class has no items")
        items = []
        for j, it in enumerate(cls):
            path = f"classes[{i}][{j}]"
            _expect(isinstance(it, dict), path, "item must be an object")
            extra = set(it) - {"cost", "samples"}
            _expect(not extra, path, f"unknown keys {sorted(extra)}")
            _expect("cost" in it and _is_number(it["cost"]), f"{path}.cost",
                    "must be a number")
            s = it.get("samples")
            _expect(isinstance(s, list) and all(_is_number(v) for v in s),
                    f"{path}.samples", "must be an array of numbers")
            _expect(len(s) == L, f"{path}.samples", f"expected L={L} samples, got {len(s)}")
            items.append(Item.from_samples(it["cost"], s))
        classes.append(tuple(items))
    return Instance(tuple(classes), float(W), float(P0), name)


def loads_instance(text: str | bytes, name: str = "") -> Instance:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed instance document: {exc}") from exc
    return instance_from_dict(doc, name)


def load_instance(source: IO[bytes] | IO[str] | str, name: str = "") -> Instance:
    """Read an instance from an open stream or a file path."""
    if isinstance(source, str):
        with open(source, "rb") as fh:
            return loads_instance(fh.read(), name or source)
    return loads_instance(source.read(), name)


def dumps_instance(instance: Instance) -> str:
    # repr-based float formatting in json round-trips bit-exactly
    return json.dumps(instance.to_dict())


def dump_instance(instance: Instance, fh: IO[str]) -> None:
    fh.write(dumps_instance(instance))


@dataclass(frozen=True)
class Solution:
    """One picked item index per class."""

    picks: tuple[int, ...]

    def __init__(self, picks: Sequence[int]):
        object.__setattr__(self, "picks", tuple(int(p) for p in picks))

    def __len__(self) -> int:
        return len(self.picks)

    def replace(self, cls: int, item: int) -> "Solution":
        p = list(self.picks)
        p[cls] = item
        return Solution(p)

    def to_dict(self) -> dict[str, list[int]]:
        return {"picks": list(self.picks)}


def dumps_solution(solution: Solution) -> str:
    return json.dumps(solution.to_dict())


def load_solution(source: IO[str] | IO[bytes] | str) -> Solution:
    if isinstance(source, str):
        with open(source, "rb") as fh:
            text = fh.read()
    else:
        text = source.read()
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed solution document: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != {"picks"}:
        raise ValidationError("$", 'solution must be {"picks": [...]}')
    picks = doc["picks"]
    if not isinstance(picks, list) or not all(
            isinstance(p, int) and not isinstance(p, bool) for p in picks):
        raise ValidationError("picks", "must be an array of integers")
    return Solution(picks)


def validate_solution(instance: Instance, solution: Solution) -> None:
    """Raise :class:`SolutionError` naming the first offending class."""
    if len(solution.picks) != instance.num_classes:
        raise SolutionError(
            f"solution has {len(solution.picks)} picks, instance has "
            f"{instance.num_classes} classes")
    for i, (p, n) in enumerate(zip(solution.picks, instance.class_sizes)):
        if not 0 <= p < n:
            raise SolutionError(f"class {i}: pick {p} out of range [0, {n})", i)


def total_cost(instance: Instance, solution: Solution) -> float:
    validate_solution(instance, solution)
    return float(sum(instance.classes[i][j].cost for i, j in enumerate(solution.picks)))
