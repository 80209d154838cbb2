"""Anonymizing codes: idealized uniform assignments and the phone-digit code.

In simulation a fresh uniform random code in {1..m} is assigned to every
vertex per trial.  For field ingestion the same role is played by a
deterministic encoding of the trailing digits of a phone number, two bits
per digit, which is many-to-one and hence not invertible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .multiset import Multiset


@dataclass
class HashAssignment:
    """A materialized code table psi: vertex id -> code in {1..m}."""

    m: int
    table: dict[int, int]

    def code_of(self, vertex: int) -> int:
        try:
            return self.table[vertex]
        except KeyError:
            raise ValueError(f"vertex {vertex} has no assigned code") from None


def draw_hash(vertices: Iterable[int], m: int, rng_seed) -> HashAssignment:
    """Assign each vertex an independent uniform code in {1..m}.

    Vertices are sorted before drawing so the table is a pure function of
    (vertex set, m, seed).
    """
    if m < 1:
        raise ValueError(f"hash space size must be >= 1, got {m}")
    ordered = sorted(int(v) for v in vertices)
    rng = np.random.default_rng(rng_seed)
    codes = rng.integers(1, m + 1, size=len(ordered))
    return HashAssignment(m=m, table={v: int(c) for v, c in zip(ordered, codes)})


def apply_hash(psi: HashAssignment, ms: Multiset) -> Multiset:
    """Push a multiset over vertices through psi; mass is preserved.

    Multiplicities of vertices sharing a code add up, so the image is a
    multiset over codes even when the input is a plain set.
    """
    counts: dict[int, int] = {}
    for vertex, mult in ms.items():
        code = psi.code_of(vertex)
        counts[code] = counts.get(code, 0) + mult
    return Multiset(counts)


@dataclass(frozen=True)
class TelefunkenCode:
    """A 2d-bit phone-digit code; many phone numbers share each value."""

    digits_used: int
    code: int

    @property
    def space_size(self) -> int:
        return 1 << (2 * self.digits_used)


def telefunken_encode(phone_digits: str, d: int) -> TelefunkenCode:
    """Encode the last ``d`` digits of a phone number, last digit first.

    Each digit contributes two bits: parity (odd -> 1) followed by the
    magnitude class (5-9 -> 1).  The last phone digit occupies the most
    significant bit pair.  The code space has size 2^(2d); the convention is
    fixed arbitrarily (only collisions matter) but is kept bit-exact for
    interoperability.
    """
    if d < 1:
        raise ValueError(f"need at least one digit, got d={d}")
    if not phone_digits or not phone_digits.isdigit():
        raise ValueError(f"phone digits must be a non-empty decimal string, got {phone_digits!r}")
    if len(phone_digits) < d:
        raise ValueError(f"need at least {d} digits, got {len(phone_digits)}")
    code = 0
    for i in range(d):
        digit = int(phone_digits[-(i + 1)])
        parity = digit & 1
        magnitude = 1 if digit >= 5 else 0
        code = (code << 2) | (parity << 1) | magnitude
    return TelefunkenCode(digits_used=d, code=code)


def telefunken_space(d: int) -> int:
    """Hash space size implied by using ``d`` trailing phone digits."""
    if d < 1:
        raise ValueError(f"need at least one digit, got d={d}")
    return 1 << (2 * d)
