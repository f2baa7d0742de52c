"""Words over the ten-letter tile alphabet and their exact geometry.

Letters name the ten first-stage cells of the doubled-center triadic
subdivision: '1'..'9' are the nine grid cells, row-major from the bottom-left,
and '0' is the second copy of the center cell.  A word of length n names a
tile of the n-th stage; its projected footprint is a triadic square computed
by composing the three fold branches per coordinate.  Everything here is exact
integer / Fraction arithmetic; no floats.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

ALPHABET = "0123456789"
GRID_LETTERS = "123456789"
CENTER_LETTERS = "50"


class ParseError(ValueError):
    """Word text that does not parse; the message names the offending position."""


def _grid_col(code):
    return 2 if code == "0" else (int(code) - 1) % 3 + 1


def _grid_row(code):
    return 2 if code == "0" else (int(code) - 1) // 3 + 1


@dataclass(frozen=True)
class Letter:
    """One subdivision cell: grid position (col, row in 1..3) plus sheet bit.

    sheet_bit is 0 for '5', 1 for '0', and None for the eight non-center
    letters, which live on the unique sheet of their cell.
    """

    code: str
    grid_col: int
    grid_row: int
    sheet_bit: int | None


LETTERS = {
    c: Letter(c, _grid_col(c), _grid_row(c), {"5": 0, "0": 1}.get(c))
    for c in ALPHABET
}

# (col, row) -> letter code of the base sheet; the center maps to '5'.
_LETTER_AT = {(_grid_col(c), _grid_row(c)): c for c in GRID_LETTERS}


def letter_at(col, row):
    """Base-sheet letter code for a grid position with col, row in 1..3."""
    try:
        return _LETTER_AT[(col, row)]
    except KeyError:
        raise ValueError(f"grid position out of range: ({col}, {row})") from None


def parse_word(text):
    """Parse a word from letter codes or from the triple form.

    Accepts "25" as well as "(2,1,1);(2,2,2)".  Triples are (col,row,sheet)
    with sheet 1 for the base copy and 2 for the doubled center.  Returns the
    canonical letter-code string.
    """
    text = text.strip()
    if text.startswith("("):
        return _parse_triples(text)
    for pos, ch in enumerate(text):
        if ch not in ALPHABET:
            raise ParseError(f"invalid character {ch!r} at position {pos}")
    return text


def _parse_triples(text):
    letters = []
    for pos, piece in enumerate(text.split(";")):
        piece = piece.strip()
        if not (piece.startswith("(") and piece.endswith(")")):
            raise ParseError(f"malformed triple at position {pos}: {piece!r}")
        parts = piece[1:-1].split(",")
        if len(parts) != 3:
            raise ParseError(f"malformed triple at position {pos}: {piece!r}")
        try:
            col, row, sheet = (int(p) for p in parts)
        except ValueError:
            raise ParseError(
                f"non-integer entry in triple at position {pos}: {piece!r}"
            ) from None
        if not (1 <= col <= 3 and 1 <= row <= 3) or sheet not in (1, 2):
            raise ParseError(f"triple out of range at position {pos}: {piece!r}")
        if sheet == 2:
            if (col, row) != (2, 2):
                raise ParseError(
                    f"sheet 2 is only defined at the center, position {pos}: {piece!r}"
                )
            letters.append("0")
        else:
            letters.append(letter_at(col, row))
    return "".join(letters)


def word_to_triples(word):
    """Render a word in the triple form accepted by parse_word."""
    out = []
    for c in word:
        let = LETTERS[c]
        sheet = 2 if c == "0" else 1
        out.append(f"({let.grid_col},{let.grid_row},{sheet})")
    return ";".join(out)


def all_words(level):
    """All 10^level words in lexicographic order (index of w is int(w))."""
    return ["".join(p) for p in itertools.product(ALPHABET, repeat=level)]


# ---------------------------------------------------------------------------
# flip group


def compose_bits(a, b):
    """XOR of two bit strings, right-padded with '0' to the longer length."""
    if len(a) < len(b):
        a, b = b, a
    b = b.ljust(len(a), "0")
    return "".join("1" if x != y else "0" for x, y in zip(a, b))


def flip(word, bits):
    """Swap '5' and '0' at every level whose bit is 1.

    The bit string must cover the word: len(bits) >= len(word).  Levels whose
    letter is not a center letter are untouched regardless of the bit.
    """
    if len(bits) < len(word):
        raise ValueError(
            f"bit string of length {len(bits)} cannot act on a word of length {len(word)}"
        )
    swapped = {"5": "0", "0": "5"}
    return "".join(
        swapped[c] if (b == "1" and c in swapped) else c
        for c, b in zip(word, bits)
    )


def section(grid_word, bits):
    """Lift a center-free grid word to the sheet selected by bits.

    Replaces '5' with '0' exactly at levels whose bit is 1.  project_word of
    the result gives grid_word back.
    """
    if "0" in grid_word:
        raise ValueError("section expects a grid word with no '0' letters")
    if len(bits) < len(grid_word):
        raise ValueError(
            f"bit string of length {len(bits)} cannot lift a word of length {len(grid_word)}"
        )
    return "".join(
        "0" if (c == "5" and b == "1") else c for c, b in zip(grid_word, bits)
    )


def project_word(word):
    """Collapse the doubled center: every '0' becomes '5'."""
    return word.replace("0", "5")


def shift(word):
    """Drop the first letter (pass to the next subdivision stage)."""
    if not word:
        raise ValueError("cannot shift the empty word")
    return word[1:]


def prepend(letter, word):
    """Prefix a single letter (descend into that first-stage cell)."""
    if len(letter) != 1 or letter not in ALPHABET:
        raise ValueError(f"not a letter: {letter!r}")
    return letter + word


# ---------------------------------------------------------------------------
# exact projected geometry


@dataclass(frozen=True)
class TriadicSquare:
    """Axis square [x,x+1]/3^level x [y,y+1]/3^level with chart orientation.

    x_sign / y_sign are +1 when the tile chart preserves that coordinate's
    direction and -1 when it reverses it; each middle-column (middle-row)
    letter along the word flips the corresponding sign once.
    """

    level: int
    x: int
    y: int
    x_sign: int
    y_sign: int

    def x_interval(self):
        d = 3**self.level
        return Fraction(self.x, d), Fraction(self.x + 1, d)

    def y_interval(self):
        d = 3**self.level
        return Fraction(self.y, d), Fraction(self.y + 1, d)


def _advance(index, sign, col):
    # One subdivision step of a single coordinate: the branch for column
    # `col` refines [i, i+1] to [3i+off, 3i+off+1], where the offset depends
    # on the current chart direction; the middle branch reverses direction.
    if col == 2:
        return 3 * index + 1, -sign
    if (col == 1) == (sign == 1):
        return 3 * index, sign
    return 3 * index + 2, sign


def _square_state(word):
    ix = iy = 0
    sx = sy = 1
    for c in word:
        let = LETTERS[c]
        ix, sx = _advance(ix, sx, let.grid_col)
        iy, sy = _advance(iy, sy, let.grid_row)
    return ix, iy, sx, sy


def _prefix_states(word):
    """States after each prefix, index k = state of word[:k]; k = 0 is root."""
    states = [(0, 0, 1, 1)]
    ix = iy = 0
    sx = sy = 1
    for c in word:
        let = LETTERS[c]
        ix, sx = _advance(ix, sx, let.grid_col)
        iy, sy = _advance(iy, sy, let.grid_row)
        states.append((ix, iy, sx, sy))
    return states


def word_square(word):
    """Exact projected footprint of a word's tile."""
    ix, iy, sx, sy = _square_state(word)
    return TriadicSquare(len(word), ix, iy, sx, sy)


def grid_word_of_square(level, x, y):
    """The unique center-free word whose square has indices (x, y).

    Inverse of word_square restricted to grid words; other preimages are the
    sheet lifts reachable via section().
    """
    top = 3**level
    if not (0 <= x < top and 0 <= y < top):
        raise ValueError(f"square indices out of range at level {level}: ({x}, {y})")
    letters = []
    sx = sy = 1
    for k in range(level):
        p = 3 ** (level - k - 1)
        col = _col_from_offset((x // p) % 3, sx)
        row = _col_from_offset((y // p) % 3, sy)
        if col == 2:
            sx = -sx
        if row == 2:
            sy = -sy
        letters.append(letter_at(col, row))
    return "".join(letters)


def _col_from_offset(d, s):
    if d == 1:
        return 2
    return 1 if (d == 0) == (s == 1) else 3


def fold(t):
    """The degree-3 fold of [0,1]: 3t, then 2-3t, then 3t-2 on the thirds."""
    if not 0 <= t <= 1:
        raise ValueError(f"fold domain is [0,1], got {t}")
    s = 3 * t
    if s <= 1:
        return s
    if s <= 2:
        return 2 - s
    return s - 2


@dataclass(frozen=True)
class Segment:
    """Closed axis-aligned segment; axis 'v' fixes x = pos, 'h' fixes y = pos."""

    axis: str
    pos: Fraction
    lo: Fraction
    hi: Fraction

    def length(self):
        return self.hi - self.lo


def seam_rectangles(word, k):
    """The four seam segments of level k along the given word.

    Level k must carry a center letter; the seam is the boundary of the
    level-k center square containing the word's tile, in absolute [0,1]^2
    coordinates.
    """
    n = len(word)
    if not 1 <= k <= n:
        raise ValueError(f"level {k} outside 1..{n}")
    if word[k - 1] not in CENTER_LETTERS:
        raise ValueError(f"letter {word[k - 1]!r} at level {k} is not a center letter")
    sq = word_square(word[:k])
    d = 3**k
    x0, x1 = Fraction(sq.x, d), Fraction(sq.x + 1, d)
    y0, y1 = Fraction(sq.y, d), Fraction(sq.y + 1, d)
    return (
        Segment("v", x0, y0, y1),
        Segment("v", x1, y0, y1),
        Segment("h", y0, x0, x1),
        Segment("h", y1, x0, x1),
    )
