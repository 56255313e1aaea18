"""Binary words and the leaf encoding.

A word is a string over the alphabet {0, 1}; the empty word is "".  A word
w = x1 x2 ... xm of length m names the depth-m cylinder of all sequences
starting with w.  Cylinders at a fixed depth m are numbered by the *leaf
encoding*: the word (x1, ..., xm) gets the integer x1 + 2*x2 + ... +
2^(m-1)*xm, i.e. the first coordinate is the least significant bit.  Under
this encoding the finite odometer (add one, carry to the right) becomes
plain integer increment mod 2^m, which is what makes independent oracles
cheap everywhere else in the library.
"""

from fractions import Fraction


def check_word(w: str) -> str:
    if any(c not in "01" for c in w):
        raise ValueError(f"not a binary word: {w!r}")
    return w


def word_to_leaf(w: str) -> int:
    """Leaf index of a word at depth len(w)."""
    check_word(w)
    return sum(1 << i for i, c in enumerate(w) if c == "1")


def leaf_to_word(leaf: int, depth: int) -> str:
    """Word of length ``depth`` whose leaf index is ``leaf``."""
    if not 0 <= leaf < (1 << depth):
        raise ValueError(f"leaf {leaf} out of range at depth {depth}")
    return "".join("1" if (leaf >> i) & 1 else "0" for i in range(depth))


def concat(a: str, b: str) -> str:
    return check_word(a) + check_word(b)


def zeros(n: int) -> str:
    return "0" * n


def ones(n: int) -> str:
    return "1" * n


def parse_fraction(text: str) -> Fraction:
    """Parse ``p/q`` or a bare integer into an exact Fraction."""
    return Fraction(text.strip())


def format_fraction(x: Fraction) -> str:
    """Render an exact rational as ``p/q`` in lowest terms (always with a
    denominator, so zero prints as ``0/1``)."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"
