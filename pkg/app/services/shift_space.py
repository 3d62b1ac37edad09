"""Eventually periodic points of bi-infinite shift spaces.

A point is stored as `left | core | right @ offset`: the left word repeats towards -inf, the right
word towards +inf, and `offset` is the index inside `core` that sits at coordinate 0. Positions
before the core read the left word backwards from its last symbol, so `left[-1]` is the symbol
just before `core[0]`.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

Word = tuple[int, ...]


def rotate(word: Sequence[int], steps: int) -> Word:
    if not word:
        return ()
    cut = steps % len(word)
    return tuple(word[cut:]) + tuple(word[:cut])


def primitive_root(word: Sequence[int]) -> Word:
    size = len(word)
    for length in range(1, size + 1):
        if size % length == 0 and tuple(word[:length]) * (size // length) == tuple(word):
            return tuple(word[:length])
    return tuple(word)


def least_rotation(word: Sequence[int]) -> Word:
    return min(rotate(word, shift) for shift in range(max(1, len(word))))


def is_primitive(word: Sequence[int]) -> bool:
    return len(primitive_root(word)) == len(word)


def _format_word(word: Sequence[int], dotted: bool) -> str:
    return ".".join(str(symbol) for symbol in word) if dotted else "".join(map(str, word))


def _parse_word(text: str) -> Word:
    if not text:
        return ()
    if "." in text:
        return tuple(int(part) for part in text.split("."))
    return tuple(int(char) for char in text)


@dataclass(frozen=True, slots=True, eq=False)
class SymbolicPoint:
    left: Word
    core: Word
    right: Word
    offset: int = 0

    def __post_init__(self) -> None:
        if not self.left or not self.right:
            raise ValueError("Left and right periodic words must be non-empty")

    # ---- construction ----
    @classmethod
    def periodic(cls, word: Sequence[int], offset: int = 0) -> SymbolicPoint:
        """The periodic point word^inf with word[offset mod len] at coordinate 0."""
        root = tuple(word)
        aligned = rotate(root, offset)
        return cls(left=aligned, core=(), right=aligned, offset=0)

    @classmethod
    def parse(cls, text: str) -> SymbolicPoint:
        body, _, offset = text.partition("@")
        left, core, right = body.split("|")
        return cls(_parse_word(left), _parse_word(core), _parse_word(right), int(offset or 0))

    # ---- access ----
    def symbol(self, index: int) -> int:
        position = index + self.offset
        size = len(self.core)
        if 0 <= position < size:
            return self.core[position]
        if position >= size:
            return self.right[(position - size) % len(self.right)]
        return self.left[position % len(self.left)]

    def window(self, start: int, stop: int) -> Word:
        """Symbols at coordinates start..stop-1."""
        return tuple(self.symbol(index) for index in range(start, stop))

    @property
    def core_span(self) -> tuple[int, int]:
        """Coordinates covered by the core word, as a half-open range."""
        return (-self.offset, len(self.core) - self.offset)

    def _comparison_span(self, other: SymbolicPoint) -> tuple[int, int]:
        left_period = math.lcm(len(self.left), len(other.left))
        right_period = math.lcm(len(self.right), len(other.right))
        low = min(self.core_span[0], other.core_span[0]) - left_period
        high = max(self.core_span[1], other.core_span[1]) + right_period
        return low, high

    # ---- dynamics ----
    def shift(self, steps: int = 1) -> SymbolicPoint:
        return SymbolicPoint(self.left, self.core, self.right, self.offset + steps)

    def splice(self, past: SymbolicPoint) -> SymbolicPoint:
        """Point agreeing with `past` on negative coordinates and with self from 0 on."""
        before = max(0, past.offset)
        after = max(0, len(self.core) - self.offset)
        left = rotate(past.left, past.offset - before)
        core = past.window(-before, 0) + self.window(0, after)
        right = rotate(self.right, after + self.offset - len(self.core))
        return SymbolicPoint(left, core, right, before)

    @property
    def is_periodic(self) -> bool:
        steps = math.lcm(len(self.left), len(self.right))
        return self.shift(steps) == self

    @property
    def period(self) -> int | None:
        """Minimal period for periodic points, otherwise None."""
        if not self.is_periodic:
            return None
        return len(primitive_root(self.right))

    def orbit(self) -> list[SymbolicPoint]:
        size = self.period
        if size is None:
            raise ValueError("Only periodic points have a finite orbit")
        return [self.shift(step) for step in range(size)]

    def symbols_used(self) -> set[int]:
        return set(self.left) | set(self.core) | set(self.right)

    def adjacent_pairs(self) -> set[tuple[int, int]]:
        """Every pair (s_i, s_i+1) that occurs anywhere in the sequence."""
        low = self.core_span[0] - 2 * len(self.left) - 1
        high = self.core_span[1] + 2 * len(self.right) + 1
        symbols = self.window(low, high)
        return set(zip(symbols, symbols[1:]))

    def admissible(self, matrix: np.ndarray) -> bool:
        transitions = np.asarray(matrix)
        size = transitions.shape[0]
        for first, second in self.adjacent_pairs():
            if not (0 <= first < size and 0 <= second < size):
                return False
            if not transitions[first, second]:
                return False
        return True

    # ---- metric ----
    def first_difference(self, other: SymbolicPoint) -> int | None:
        low, high = self._comparison_span(other)
        radius = max(abs(low), abs(high)) + 1
        for distance in range(radius + 1):
            if self.symbol(distance) != other.symbol(distance):
                return distance
            if distance and self.symbol(-distance) != other.symbol(-distance):
                return distance
        return None

    def distance(self, other: SymbolicPoint) -> float:
        index = self.first_difference(other)
        return 0.0 if index is None else 2.0 ** (-index)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymbolicPoint):
            return NotImplemented
        low, high = self._comparison_span(other)
        return self.window(low, high) == other.window(low, high)

    def __hash__(self) -> int:
        return hash(
            (
                least_rotation(primitive_root(self.left)),
                least_rotation(primitive_root(self.right)),
            )
        )

    def __str__(self) -> str:
        dotted = any(symbol >= 10 for symbol in self.symbols_used())
        parts = (_format_word(word, dotted) for word in (self.left, self.core, self.right))
        return "|".join(parts) + f"@{self.offset}"


def words(alphabet: int, length: int) -> Iterable[Word]:
    if length == 0:
        yield ()
        return
    for prefix in words(alphabet, length - 1):
        for symbol in range(alphabet):
            yield prefix + (symbol,)
