"""Integer-multiplicity multisets with the full operator algebra.

A multiset stores how many times each element appears.  Elements with
multiplicity zero are simply absent, so the internal map only ever holds
positive counts.  Two distinct size notions matter throughout this package
and are kept rigorously apart:

* ``support_size`` -- the number of distinct elements present, and
* ``mass`` -- the total count including repetitions.

Elements may come from any universe whose members are hashable and mutually
orderable (vertex ids, hash codes, string labels).  Iteration is always in
sorted element order so that anything derived from a multiset is
reproducible run to run.
"""

from __future__ import annotations

import io
import os
from typing import IO, Iterable, Iterator, Mapping, Union

ElementsLike = Union["Multiset", Mapping[object, int], Iterable[object], None]

_TEXT_HEADER = "# rdscensus multiset v1"


class Multiset:
    """An immutable bag of elements with positive integer multiplicities."""

    __slots__ = ("_counts",)

    def __init__(self, items: ElementsLike = None):
        counts: dict = {}
        if items is None:
            pass
        elif isinstance(items, Multiset):
            counts = dict(items._counts)
        elif isinstance(items, Mapping):
            for elt, mult in items.items():
                if not isinstance(mult, int) or isinstance(mult, bool):
                    raise TypeError(f"multiplicity of {elt!r} must be an int, got {type(mult).__name__}")
                if mult < 0:
                    raise ValueError(f"multiplicity of {elt!r} is negative: {mult}")
                if mult > 0:
                    counts[elt] = counts.get(elt, 0) + mult
        else:
            for elt in items:
                counts[elt] = counts.get(elt, 0) + 1
        object.__setattr__(self, "_counts", counts)

    def __setattr__(self, name, value):
        raise AttributeError("Multiset is immutable")

    # -- size and membership -------------------------------------------------

    @property
    def support(self) -> tuple:
        """The underlying set of distinct elements, sorted."""
        return tuple(sorted(self._counts))

    @property
    def support_size(self) -> int:
        return len(self._counts)

    @property
    def mass(self) -> int:
        """Total multiplicity over all elements."""
        return sum(self._counts.values())

    def multiplicity(self, elt) -> int:
        return self._counts.get(elt, 0)

    def is_set(self) -> bool:
        """True when no element appears more than once."""
        return all(v == 1 for v in self._counts.values())

    def __contains__(self, elt) -> bool:
        return elt in self._counts

    def __iter__(self) -> Iterator:
        return iter(sorted(self._counts))

    def items(self) -> Iterator[tuple[object, int]]:
        """(element, multiplicity) pairs in sorted element order."""
        for elt in sorted(self._counts):
            yield elt, self._counts[elt]

    def __len__(self) -> int:
        # len() counts distinct elements, mirroring collections.Counter.
        return len(self._counts)

    def __bool__(self) -> bool:
        return bool(self._counts)

    def __eq__(self, other) -> bool:
        if isinstance(other, Multiset):
            return self._counts == other._counts
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._counts.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{e!r}: {m}" for e, m in self.items())
        return f"Multiset({{{inner}}})"

    # -- operator algebra ----------------------------------------------------

    def union(self, other: "Multiset") -> "Multiset":
        """Elementwise max of multiplicities."""
        out = dict(self._counts)
        for elt, mult in other._counts.items():
            if mult > out.get(elt, 0):
                out[elt] = mult
        return _wrap(out)

    def intersect(self, other: "Multiset") -> "Multiset":
        """Elementwise min of multiplicities."""
        small, large = self._counts, other._counts
        if len(large) < len(small):
            small, large = large, small
        out = {}
        for elt, mult in small.items():
            m2 = large.get(elt, 0)
            if m2 > 0:
                out[elt] = min(mult, m2)
        return _wrap(out)

    def sum_union(self, other: "Multiset") -> "Multiset":
        """Elementwise sum; masses add exactly."""
        out = dict(self._counts)
        for elt, mult in other._counts.items():
            out[elt] = out.get(elt, 0) + mult
        return _wrap(out)

    def difference(self, other: "Multiset") -> "Multiset":
        """Saturating elementwise subtraction (never below zero)."""
        out = {}
        for elt, mult in self._counts.items():
            rem = mult - other._counts.get(elt, 0)
            if rem > 0:
                out[elt] = rem
        return _wrap(out)

    def filter(self, other: "Multiset") -> "Multiset":
        """Keep this multiset's counts for elements present in ``other``.

        Generalizes set intersection: the result keeps *this* side's
        multiplicities, whereas ``intersect`` takes the elementwise min.
        """
        out = {elt: mult for elt, mult in self._counts.items() if elt in other._counts}
        return _wrap(out)

    # -- serialization -------------------------------------------------------

    def to_text(self, target: Union[str, os.PathLike, IO[str]]) -> None:
        """Write ``element,count`` lines (sorted by element)."""
        if isinstance(target, (str, os.PathLike)):
            with open(target, "w", encoding="utf-8") as fh:
                self.to_text(fh)
            return
        target.write(_TEXT_HEADER + "\n")
        for elt, mult in self.items():
            target.write(f"{elt},{mult}\n")

    @classmethod
    def from_text(cls, source: Union[str, os.PathLike, IO[str]]) -> "Multiset":
        """Read a two-column ``element,count`` file written by :meth:`to_text`.

        Elements that parse as integers are loaded as ints so that integer
        universes round-trip; anything else stays a string.
        """
        if isinstance(source, (str, os.PathLike)):
            with open(source, "r", encoding="utf-8") as fh:
                return cls.from_text(fh)
        counts: dict = {}
        for lineno, raw in enumerate(source, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            elt_str, sep, count_str = line.rpartition(",")
            if not sep:
                raise ValueError(f"line {lineno}: expected 'element,count', got {line!r}")
            try:
                mult = int(count_str)
            except ValueError:
                raise ValueError(f"line {lineno}: count is not an integer: {count_str!r}") from None
            if mult <= 0:
                raise ValueError(f"line {lineno}: count must be positive, got {mult}")
            try:
                elt: object = int(elt_str)
            except ValueError:
                elt = elt_str
            counts[elt] = counts.get(elt, 0) + mult
        return cls(counts)

    def to_text_str(self) -> str:
        buf = io.StringIO()
        self.to_text(buf)
        return buf.getvalue()


def _wrap(counts: dict) -> Multiset:
    ms = Multiset()
    object.__getattribute__(ms, "_counts").update(counts)
    return ms


def matches(a: Multiset, b: Multiset) -> Multiset:
    """Elements of ``a`` that also occur in ``b``, at ``a``'s multiplicity."""
    return a.filter(b)
