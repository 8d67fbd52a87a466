"""Formal linear combinations over subsystem symbols and symbol pairs.

A ``FormalSum`` is kept exactly as written: term order is preserved and
repeated symbols are not merged, so ``3|0> - 2|0> + |1>`` and ``|0> + |1>``
are different sums. ``normal_form`` gives the merged view, and the quotient
map / identification map send sums to actual state vectors.

Text form mirrors the informal ket notation::

    (|0>,|1>) + (|-1>,|0>)        pair sums
    3|0> - 2|0> + |1>             subsystem sums
    |0'>  |-1'>  |i0''>           X frame primes once, Y frame twice

Phases other than +-1 and +-i print as ``|e^{i0.5}0>``; arbitrary points
of the subsystem space (needed for relation generators) print as
``|v(a0;a1)>``.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .hilbert import (
    ARITH_TOL,
    COMPOSE_TOL,
    DomainError,
    Frame,
    Ket,
    TensorState,
    equal_up_to_global_phase,
    frame_basis,
)

_FRAME_RANK = {Frame.Z: 0, Frame.X: 1, Frame.Y: 2}
_PRIMES = {Frame.Z: "", Frame.X: "'", Frame.Y: "''"}


class DegenerateSumError(ValueError):
    """The formal sum maps to the zero vector, i.e. it lies in the relation subspace."""


class DestructiveInterferenceError(ValueError):
    """Identified subsystem sum cancels to zero: no definite outcome."""


def _angle(phase: complex) -> float:
    a = cmath.phase(phase)
    if a < 0:
        a += 2 * math.pi
    # fold 2pi - eps back to 0 so +1 sorts first
    if abs(a - 2 * math.pi) <= ARITH_TOL:
        a = 0.0
    return a


@dataclass(frozen=True, eq=False)
class SubSymbol:
    """Signed labeled basis ket of one subsystem: ``phase * |index_frame>``."""

    frame: Frame
    index: int
    phase: complex = 1 + 0j

    def __post_init__(self):
        object.__setattr__(self, "frame", Frame(self.frame))
        if self.index not in (0, 1):
            raise DomainError(f"basis index must be 0 or 1, got {self.index!r}")
        phase = complex(self.phase)
        if abs(abs(phase) - 1) > ARITH_TOL:
            raise DomainError(f"symbol phase must have unit modulus, got {phase!r}")
        object.__setattr__(self, "phase", phase)

    def __eq__(self, other):
        if not isinstance(other, SubSymbol):
            return NotImplemented
        return (
            self.frame == other.frame
            and self.index == other.index
            and abs(self.phase - other.phase) <= ARITH_TOL
        )

    def __hash__(self):
        return hash((self.frame, self.index))

    def vector(self) -> np.ndarray:
        return frame_basis(self.frame)[:, self.index] * self.phase

    def with_phase(self, factor: complex) -> "SubSymbol":
        return SubSymbol(self.frame, self.index, self.phase * factor)

    def sort_key(self) -> tuple:
        return (0, _FRAME_RANK[self.frame], self.index, round(_angle(self.phase), 12))

    def __str__(self):
        return f"|{_fmt_phase(self.phase)}{self.index}{_PRIMES[self.frame]}>"


@dataclass(frozen=True, eq=False)
class VectorSymbol:
    """An arbitrary point of a subsystem space, labeled by its Z amplitudes."""

    amps: tuple

    def __post_init__(self):
        amps = tuple(complex(a) for a in self.amps)
        if len(amps) != 2:
            raise DomainError("a subsystem vector has two amplitudes")
        object.__setattr__(self, "amps", amps)

    @classmethod
    def of(cls, vec) -> "VectorSymbol":
        return cls(tuple(np.asarray(vec, dtype=complex).ravel()))

    def __eq__(self, other):
        if not isinstance(other, VectorSymbol):
            return NotImplemented
        return all(abs(x - y) <= ARITH_TOL for x, y in zip(self.amps, other.amps))

    def __hash__(self):
        return hash(VectorSymbol)

    def vector(self) -> np.ndarray:
        return np.array(self.amps, dtype=complex)

    def with_phase(self, factor: complex) -> "VectorSymbol":
        return VectorSymbol(tuple(a * factor for a in self.amps))

    def sort_key(self) -> tuple:
        a0, a1 = self.amps
        return (1, 0, 0, 0.0, a0.real, a0.imag, a1.real, a1.imag)

    def __str__(self):
        return f"|v({_fmt_literal(self.amps[0])};{_fmt_literal(self.amps[1])})>"


Sub = Union[SubSymbol, VectorSymbol]


@dataclass(frozen=True)
class PairSymbol:
    a: Sub
    b: Sub

    def vector(self) -> np.ndarray:
        return np.kron(self.a.vector(), self.b.vector())

    def sort_key(self) -> tuple:
        return (self.a.sort_key(), self.b.sort_key())

    def __str__(self):
        return f"({self.a},{self.b})"


Symbol = Union[Sub, PairSymbol]
Term = tuple  # (coeff: complex, symbol)


@dataclass(frozen=True)
class FormalSum:
    """Terms ``(coeff, symbol)`` in the order written."""

    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self, "terms", tuple((complex(c), sym) for c, sym in self.terms)
        )

    @classmethod
    def of(cls, *symbols_or_terms) -> "FormalSum":
        terms = []
        for item in symbols_or_terms:
            if isinstance(item, tuple) and len(item) == 2 and not isinstance(item, PairSymbol):
                terms.append(item)
            else:
                terms.append((1, item))
        return cls(tuple(terms))

    @classmethod
    def parse(cls, text: str) -> "FormalSum":
        return _Parser(text).parse_sum()

    def __iter__(self) -> Iterator[Term]:
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    def __add__(self, other: "FormalSum") -> "FormalSum":
        return FormalSum(self.terms + other.terms)

    def __neg__(self) -> "FormalSum":
        return self.scale(-1)

    def __sub__(self, other: "FormalSum") -> "FormalSum":
        return self + (-other)

    def scale(self, factor: complex) -> "FormalSum":
        return FormalSum(tuple((c * factor, s) for c, s in self.terms))

    def structurally_equal(self, other: "FormalSum") -> bool:
        """Same terms in the same order, coefficients within 1e-12."""
        if len(self) != len(other):
            return False
        return all(
            abs(c1 - c2) <= ARITH_TOL and s1 == s2
            for (c1, s1), (c2, s2) in zip(self.terms, other.terms)
        )

    def __str__(self):
        return format_sum(self)


# -- text form ---------------------------------------------------------------


def _fmt_float(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _fmt_literal(z: complex) -> str:
    z = complex(z)
    sign = "-" if math.copysign(1, z.imag) < 0 else "+"
    return f"({_fmt_float(z.real)}{sign}{_fmt_float(abs(z.imag))}j)"


def _fmt_phase(phase: complex) -> str:
    for value, text in ((1, ""), (-1, "-"), (1j, "i"), (-1j, "-i")):
        if abs(phase - value) <= ARITH_TOL:
            return text
    return "e^{i" + repr(cmath.phase(phase)) + "}"


def format_sum(f: FormalSum) -> str:
    if not f.terms:
        return "0"
    parts = []
    for i, (c, sym) in enumerate(f.terms):
        sym_text = str(sym)
        if c.imag == 0:
            negative = math.copysign(1, c.real) < 0
            mag = abs(c.real)
            coeff = "" if mag == 1 else _fmt_float(mag)
            sign = "-" if negative else "+"
        else:
            coeff, sign = _fmt_literal(c), "+"
        if coeff and isinstance(sym, PairSymbol):
            coeff += " "
        if i == 0:
            parts.append(("-" if sign == "-" else "") + coeff + sym_text)
        else:
            parts.append(f" {sign} {coeff}{sym_text}")
    return "".join(parts)


_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|inf|nan")
_ANGLE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str):
        raise ValueError(f"{msg} at offset {self.pos} in {self.text!r}")

    def ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, s: str) -> bool:
        return self.text.startswith(s, self.pos)

    def expect(self, s: str):
        if not self.peek(s):
            self.error(f"expected {s!r}")
        self.pos += len(s)

    def parse_sum(self) -> FormalSum:
        self.ws()
        if self.text[self.pos:].strip() == "0":
            return FormalSum()
        terms = []
        sign = 1
        if self.peek("-"):
            sign = -1
            self.pos += 1
        elif self.peek("+"):
            self.pos += 1
        while True:
            self.ws()
            terms.append(self.parse_term(sign))
            self.ws()
            if self.pos >= len(self.text):
                break
            if self.peek("+"):
                sign = 1
            elif self.peek("-"):
                sign = -1
            else:
                self.error("expected '+' or '-'")
            self.pos += 1
        return FormalSum(tuple(terms))

    def parse_term(self, sign: int) -> Term:
        coeff: complex = 1
        if self.peek("(") and not self.peek("(|"):
            coeff = self.parse_literal()
        else:
            m = _NUMBER.match(self.text, self.pos)
            if m:
                coeff = float(m.group())
                self.pos = m.end()
        self.ws()
        return (sign * coeff, self.parse_symbol())

    def parse_literal(self) -> complex:
        if not self.peek("("):
            self.error("expected parenthesized complex literal")
        end = self.text.find(")", self.pos)
        if end < 0:
            self.error("unterminated complex literal")
        try:
            value = complex(self.text[self.pos:end + 1])
        except ValueError:
            self.error("bad complex literal")
        self.pos = end + 1
        return value

    def parse_symbol(self) -> Symbol:
        if self.peek("("):
            self.pos += 1
            self.ws()
            a = self.parse_ket()
            self.ws()
            self.expect(",")
            self.ws()
            b = self.parse_ket()
            self.ws()
            self.expect(")")
            return PairSymbol(a, b)
        return self.parse_ket()

    def parse_ket(self) -> Sub:
        self.expect("|")
        if self.peek("v("):
            self.pos += 2
            a0 = self.parse_literal()
            self.expect(";")
            a1 = self.parse_literal()
            self.expect(")>")
            return VectorSymbol((a0, a1))
        phase: complex = 1
        if self.peek("-"):
            phase = -1
            self.pos += 1
        if self.peek("e^{i"):
            self.pos += 4
            m = _ANGLE.match(self.text, self.pos)
            if not m:
                self.error("expected phase angle")
            phase *= cmath.exp(1j * float(m.group()))
            self.pos = m.end()
            self.expect("}")
        elif self.peek("i"):
            phase *= 1j
            self.pos += 1
        if self.pos >= len(self.text) or self.text[self.pos] not in "01":
            self.error("expected basis index 0 or 1")
        index = int(self.text[self.pos])
        self.pos += 1
        primes = 0
        while self.peek("'"):
            primes += 1
            self.pos += 1
        if primes > 2:
            self.error("at most two primes")
        self.expect(">")
        frame = (Frame.Z, Frame.X, Frame.Y)[primes]
        return SubSymbol(frame, index, phase)


def parse_sum(text: str) -> FormalSum:
    return FormalSum.parse(text)


# -- record form -------------------------------------------------------------


def _pair_rec(z: complex) -> list:
    return [z.real, z.imag]


def symbol_to_record(sym: Symbol) -> dict:
    if isinstance(sym, PairSymbol):
        return {"a": symbol_to_record(sym.a), "b": symbol_to_record(sym.b)}
    if isinstance(sym, VectorSymbol):
        return {"vector": [_pair_rec(a) for a in sym.amps]}
    return {"frame": sym.frame.value, "index": sym.index, "phase": _pair_rec(sym.phase)}


def symbol_from_record(rec: dict) -> Symbol:
    if "a" in rec:
        return PairSymbol(symbol_from_record(rec["a"]), symbol_from_record(rec["b"]))
    if "vector" in rec:
        return VectorSymbol(tuple(complex(re_, im) for re_, im in rec["vector"]))
    re_, im = rec.get("phase", (1.0, 0.0))
    return SubSymbol(Frame(rec["frame"]), int(rec["index"]), complex(re_, im))


def to_record(f: FormalSum) -> dict:
    return {
        "terms": [
            {"coeff": _pair_rec(c), "sym": symbol_to_record(s)} for c, s in f.terms
        ]
    }


def from_record(rec: dict) -> FormalSum:
    return FormalSum(
        tuple(
            (complex(*t["coeff"]), symbol_from_record(t["sym"])) for t in rec["terms"]
        )
    )


# -- algebra -----------------------------------------------------------------


def absorb_scalar(term: Term, side: str) -> Term:
    """Move a unit-modulus coefficient into the phase of one side of a pair."""
    coeff, sym = complex(term[0]), term[1]
    if not isinstance(sym, PairSymbol):
        raise TypeError("scalar absorption applies to pair symbols")
    if abs(abs(coeff) - 1) > ARITH_TOL:
        raise DomainError(f"only unit-modulus scalars can be absorbed, got {coeff!r}")
    if coeff == 1:
        return (1 + 0j, sym)
    if side == "A":
        return (1 + 0j, PairSymbol(sym.a.with_phase(coeff), sym.b))
    if side == "B":
        return (1 + 0j, PairSymbol(sym.a, sym.b.with_phase(coeff)))
    raise DomainError(f"side must be 'A' or 'B', got {side!r}")


def tensor_image(f: FormalSum) -> np.ndarray:
    """Unnormalized image of a pair sum in the 4-dimensional tensor space."""
    out = np.zeros(4, dtype=complex)
    for c, sym in f.terms:
        if not isinstance(sym, PairSymbol):
            raise TypeError(f"expected pair symbols, got {sym!s}")
        out += c * np.kron(sym.a.vector(), sym.b.vector())
    return out


def _zero_tol(f: FormalSum) -> float:
    scale = sum(abs(c) * np.linalg.norm(s.vector()) for c, s in f.terms)
    return ARITH_TOL * max(1.0, scale)


def quotient_map(f: FormalSum) -> TensorState:
    """Normalized class of a pair sum modulo the bilinearity relations."""
    image = tensor_image(f)
    if np.linalg.norm(image) <= _zero_tol(f):
        raise DegenerateSumError(f"{f} lies in the relation subspace")
    return TensorState(image)


def in_relation_subspace(f: FormalSum) -> bool:
    try:
        quotient_map(f)
    except DegenerateSumError:
        return True
    return False


def equivalent_mod_R(f: FormalSum, g: FormalSum, tol: float = COMPOSE_TOL) -> bool:
    """True when ``f`` and ``g`` have the same quotient image up to global phase."""
    zf, zg = in_relation_subspace(f), in_relation_subspace(g)
    if zf or zg:
        return zf and zg
    return equal_up_to_global_phase(quotient_map(f), quotient_map(g), tol)


def ket_image(f: FormalSum) -> np.ndarray:
    out = np.zeros(2, dtype=complex)
    for c, sym in f.terms:
        if isinstance(sym, PairSymbol):
            raise TypeError("identification applies to subsystem symbols")
        out += c * sym.vector()
    return out


def identify_T(f: FormalSum) -> Ket:
    """Send formal subsystem symbols to kets, sum in Hilbert space, normalize."""
    image = ket_image(f)
    if np.linalg.norm(image) <= _zero_tol(f):
        raise DestructiveInterferenceError(f"{f} cancels to the zero vector")
    return Ket(image)


def normal_form(f: FormalSum) -> FormalSum:
    """Merge coefficients on structurally equal symbols, drop zeros, sort."""
    merged: list[list] = []
    for c, sym in f.terms:
        for slot in merged:
            if slot[1] == sym:
                slot[0] += c
                break
        else:
            merged.append([c, sym])
    kept = [(c, s) for c, s in merged if abs(c) > ARITH_TOL]
    kept.sort(key=lambda t: t[1].sort_key())
    return FormalSum(tuple(kept))


def relation_generators(
    r: complex, s: complex, u: Sub, v: Sub, w: Sub
) -> tuple[FormalSum, FormalSum]:
    """The two bilinearity defects spanning the relation subspace.

    ``r(u,w) + s(v,w) - (ru+sv, w)`` with u, v on side A, and
    ``r(u,v) + s(u,w) - (u, rv+sw)`` with v, w on side B.
    """
    left = VectorSymbol.of(r * u.vector() + s * v.vector())
    first = FormalSum(
        ((r, PairSymbol(u, w)), (s, PairSymbol(v, w)), (-1, PairSymbol(left, w)))
    )
    right = VectorSymbol.of(r * v.vector() + s * w.vector())
    second = FormalSum(
        ((r, PairSymbol(u, v)), (s, PairSymbol(u, w)), (-1, PairSymbol(u, right)))
    )
    return first, second


def basis_symbols(frames: Iterable[Frame] = (Frame.Z, Frame.X, Frame.Y)) -> list[SubSymbol]:
    return [SubSymbol(fr, i) for fr in frames for i in (0, 1)]


def symbols_of(f: FormalSum) -> Sequence[Symbol]:
    return [s for _, s in f.terms]
