"""Class-1 / class-2 representatives of Bell states and their local collapse.

A Bell state written in some frame as ``v_A (x) v_B + e^{i phi} w_A (x) w_B``
has several pre-images in the free vector space on pairs, differing in
which subsystem symbol carries the superposition phase. Projecting a
pre-image onto one side and identifying the formal symbols with kets
gives a local state; for the two context classes those local states are
definite basis kets of the frame conjugate to the presentation frame.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .freevec import (
    FormalSum,
    PairSymbol,
    SubSymbol,
    equivalent_mod_R,
    identify_T,
    quotient_map,
)
from .hilbert import (
    ARITH_TOL,
    COMPOSE_TOL,
    BellKind,
    DomainError,
    Frame,
    Ket,
    bell,
    canonical_phase,
    equal_up_to_global_phase,
    expand_in_frame,
    frame_ket,
    identify_basis_ket,
    is_joint_eigenvector,
    pauli,
)


class ContextClass(str, Enum):
    CLASS1 = "CLASS1"
    CLASS2 = "CLASS2"


class ContextualError(RuntimeError):
    """A lift failed one of its structural guarantees."""


class MixedBasisError(ValueError):
    """No lift gives definite joint outcomes for different frames on A and B."""

    def __init__(self, kind: BellKind, frame_a: Frame, frame_b: Frame, witness):
        self.kind = kind
        self.frames = (frame_a, frame_b)
        self.witness = witness
        super().__init__(
            f"{kind.value} is not an eigenvector of sigma_{frame_a.value} (x) "
            f"sigma_{frame_b.value} (eigenvalue: {witness}); no mixed-basis lift exists"
        )


CONJUGATE = {Frame.Z: Frame.X, Frame.X: Frame.Z}


@dataclass(frozen=True)
class Representative:
    kind: BellKind
    klass: ContextClass
    presentation_frame: Frame
    sum: FormalSum
    local_phases: tuple  # (phi_A, phi_B); w_A carries e^{-i phi_A}, w_B carries e^{i phi_B}
    pattern: Optional[str] = None

    def quotient_holds(self, tol: float = COMPOSE_TOL) -> bool:
        return equal_up_to_global_phase(quotient_map(self.sum), bell(self.kind), tol)

    def superposition_phase(self) -> complex:
        return superposition_phase(self.kind, self.presentation_frame, self.sum)

    def phase_constraint_residual(self) -> float:
        """|e^{-i phi_A} e^{i phi_B} - e^{i phi}|"""
        phi_a, phi_b = self.local_phases
        lhs = cmath.exp(-1j * phi_a) * cmath.exp(1j * phi_b)
        return abs(lhs - self.superposition_phase())


@dataclass(frozen=True)
class LocalPair:
    """Collapsed local kets, canonicalized, with the stripped phases kept."""

    psi_a: Ket
    psi_b: Ket
    outcome_frame: Frame
    phase_a: complex = 1
    phase_b: complex = 1

    @property
    def signed_a(self) -> Ket:
        return self.psi_a.scaled(self.phase_a)

    @property
    def signed_b(self) -> Ket:
        return self.psi_b.scaled(self.phase_b)

    def side(self, side: str) -> Ket:
        return {"A": self.psi_a, "B": self.psi_b}[side]


# -- fixtures ---------------------------------------------------------------


@lru_cache(maxsize=None)
def load_fixture() -> dict:
    text = resources.files("ctxphase").joinpath("data/lifts.json").read_text()
    return json.loads(text)


def fixture_entries(section: str = "lifts") -> list[dict]:
    return list(load_fixture()[section])


@lru_cache(maxsize=None)
def _fixture_index(section: str) -> dict:
    return {
        (BellKind(e["kind"]), ContextClass(e["class"]), Frame(e["presentation"])): e
        for e in load_fixture()[section]
    }


# -- phase bookkeeping ------------------------------------------------------


def _strip(sym: SubSymbol) -> SubSymbol:
    return SubSymbol(sym.frame, sym.index)


def _two_terms(f: FormalSum):
    if len(f) != 2:
        raise DomainError("representatives have exactly two terms")
    (cv, v), (cw, w) = f.terms
    return cv, v, cw, w


def superposition_phase(kind: BellKind, frame: Frame, f: FormalSum) -> complex:
    """Relative phase of the second term's basis pair to the first's in ``kind``."""
    _, v, _, w = _two_terms(f)
    coeffs = expand_in_frame(bell(kind), frame)
    cv = coeffs[2 * v.a.index + v.b.index]
    cw = coeffs[2 * w.a.index + w.b.index]
    if abs(cv) <= ARITH_TOL or abs(cw) <= ARITH_TOL:
        raise DomainError(f"{f} does not use the support of {kind.value} in frame {frame.value}")
    ratio = complex(cw / cv)
    return ratio / abs(ratio)


def relative_phases(f: FormalSum) -> tuple[complex, complex]:
    """Per-side phase of the second term's symbol relative to the first's.

    Any coefficient ratio between the two terms is attributed to side B.
    """
    cv, v, cw, w = _two_terms(f)
    rho_a = w.a.phase / v.a.phase
    rho_b = (w.b.phase / v.b.phase) * (cw / cv)
    return rho_a, rho_b / abs(rho_b)


def local_phases_of(f: FormalSum) -> tuple[float, float]:
    rho_a, rho_b = relative_phases(f)
    return (-cmath.phase(rho_a), cmath.phase(rho_b))


def _representative(kind, klass, frame, f, pattern=None) -> Representative:
    return Representative(
        kind=kind,
        klass=klass,
        presentation_frame=frame,
        sum=f,
        local_phases=local_phases_of(f),
        pattern=pattern,
    )


# -- lifting ----------------------------------------------------------------


def lift(kind: BellKind, klass: ContextClass, presentation_frame: Frame) -> Representative:
    """The tabulated pre-image of ``kind`` for one context class and frame."""
    kind, klass, frame = BellKind(kind), ContextClass(klass), Frame(presentation_frame)
    if frame not in CONJUGATE:
        raise DomainError("presentation frame must be Z or X; use y_lift for Y outcomes")
    entry = _fixture_index("lifts")[(kind, klass, frame)]
    return _representative(kind, klass, frame, FormalSum.parse(entry["sum"]), "fixture")


def y_lift(kind: BellKind, klass: ContextClass) -> Representative:
    """Z-presentation pre-image whose local kets are Y-frame basis kets."""
    kind, klass = BellKind(kind), ContextClass(klass)
    entry = _fixture_index("y_lifts")[(kind, klass, Frame.Z)]
    return _representative(kind, klass, Frame.Z, FormalSum.parse(entry["sum"]), "y-search")


def search_y_lifts(kind: BellKind, step: float = math.pi / 2) -> list[Representative]:
    """Search local phases on a grid for lifts that collapse to Y-frame kets.

    The v-term of the Z presentation is left unphased; the w-term symbols get
    phases ``e^{i k step}``. A candidate is kept when its quotient image is
    the Bell state and both local kets are Y basis kets. Class 1 is the
    candidate whose A ket is |0''>.
    """
    kind = BellKind(kind)
    base = lift(kind, ContextClass.CLASS1, Frame.Z).sum
    _, v, _, w = _two_terms(base)
    v = PairSymbol(_strip(v.a), _strip(v.b))
    w_a, w_b = _strip(w.a), _strip(w.b)
    n_steps = int(round(2 * math.pi / step))
    found = []
    for ka, kb in product(range(n_steps), repeat=2):
        pa, pb = cmath.exp(1j * ka * step), cmath.exp(1j * kb * step)
        f = FormalSum(((1, v), (1, PairSymbol(w_a.with_phase(pa), w_b.with_phase(pb)))))
        if not equal_up_to_global_phase(quotient_map(f), bell(kind)):
            continue
        try:
            ket_a = collapse(project(f, "A"))
            ket_b = collapse(project(f, "B"))
        except ValueError:
            continue
        hit_a = identify_basis_ket(ket_a, frames=(Frame.Y,))
        hit_b = identify_basis_ket(ket_b, frames=(Frame.Y,))
        if hit_a is None or hit_b is None:
            continue
        klass = ContextClass.CLASS1 if hit_a[1] == 0 else ContextClass.CLASS2
        found.append(_representative(kind, klass, Frame.Z, f, "y-search"))
    found.sort(key=lambda r: r.klass.value)
    return found


# Phase-placement patterns, as (v_A, v_B, w_A, w_B) phase factors in (phi, phi').
def _e(x: float) -> complex:
    return cmath.exp(1j * x)


PHASE_PATTERNS = {
    (1, ContextClass.CLASS1): lambda p, q: (1, 1, 1, _e(p)),
    (1, ContextClass.CLASS2): lambda p, q: (1, 1, _e(p), 1),
    (2, ContextClass.CLASS1): lambda p, q: (1, _e(q), 1, 1),
    (2, ContextClass.CLASS2): lambda p, q: (_e(q), 1, 1, 1),
    (3, ContextClass.CLASS1): lambda p, q: (_e(-q), _e(q), _e(p), 1),
    (3, ContextClass.CLASS2): lambda p, q: (_e(-q), _e(q), 1, _e(p)),
    (4, ContextClass.CLASS1): lambda p, q: (_e(q), 1, _e(-p), _e(p)),
    (4, ContextClass.CLASS2): lambda p, q: (1, _e(q), _e(-p), _e(p)),
}


def phase_pattern(
    kind: BellKind, frame: Frame, row: int, column: ContextClass, phi: float, phi_prime: float
) -> FormalSum:
    """Instantiate one phase-placement pattern on the basis pairs of ``kind`` in ``frame``."""
    base = lift(kind, ContextClass.CLASS1, frame).sum
    _, v, _, w = _two_terms(base)
    pva, pvb, pwa, pwb = PHASE_PATTERNS[(row, ContextClass(column))](phi, phi_prime)
    return FormalSum(
        (
            (1, PairSymbol(_strip(v.a).with_phase(pva), _strip(v.b).with_phase(pvb))),
            (1, PairSymbol(_strip(w.a).with_phase(pwa), _strip(w.b).with_phase(pwb))),
        )
    )


def enumerate_representatives(
    kind: BellKind, presentation_frame: Frame, phase_grid: Sequence[float] = (0.0, math.pi)
) -> list[Representative]:
    """All phase-placement patterns on the grid that are pre-images of ``kind``.

    Both phase parameters range over ``phase_grid``. Candidates failing the
    quotient identity are dropped, structural duplicates are dropped, and
    each survivor is tagged by its A-side relative phase: equal to the
    tabulated class-1 lift means class 1, opposite means class 2.
    """
    kind, frame = BellKind(kind), Frame(presentation_frame)
    if not phase_grid:
        raise DomainError("phase grid must be nonempty")
    target = bell(kind)
    ref_rho_a, _ = relative_phases(lift(kind, ContextClass.CLASS1, frame).sum)
    out: list[Representative] = []
    for (row, column), _pattern in PHASE_PATTERNS.items():
        for phi, phi_prime in product(phase_grid, repeat=2):
            f = phase_pattern(kind, frame, row, column, phi, phi_prime)
            if not equal_up_to_global_phase(quotient_map(f), target):
                continue
            rho_a, _ = relative_phases(f)
            if abs(rho_a - ref_rho_a) <= ARITH_TOL:
                klass = ContextClass.CLASS1
            elif abs(rho_a + ref_rho_a) <= ARITH_TOL:
                klass = ContextClass.CLASS2
            else:
                continue
            if any(r.sum.structurally_equal(f) for r in out):
                continue
            tag = f"pattern row {row} {column.value.lower()} column (phi={phi:.6g}, phi'={phi_prime:.6g})"
            out.append(_representative(kind, klass, frame, f, tag))
    return out


def project(rep, side: str) -> FormalSum:
    """Linear extension of (u, v) -> u (side A) or (u, v) -> v (side B)."""
    f = rep.sum if isinstance(rep, Representative) else rep
    if side == "A":
        return FormalSum(tuple((c, s.a) for c, s in f.terms))
    if side == "B":
        return FormalSum(tuple((c, s.b) for c, s in f.terms))
    raise DomainError(f"side must be 'A' or 'B', got {side!r}")


def collapse(local: FormalSum) -> Ket:
    return identify_T(local)


def _collapse_pair(rep: Representative, outcome_frame: Frame) -> LocalPair:
    kets = []
    for side in ("A", "B"):
        ket = collapse(project(rep, side))
        if identify_basis_ket(ket, frames=(outcome_frame,)) is None:
            raise ContextualError(
                f"side {side} of {rep.kind.value}/{rep.klass.value} is not a "
                f"{outcome_frame.value} basis ket: {ket!r}"
            )
        kets.append(canonical_phase(ket))
    (psi_a, phase_a), (psi_b, phase_b) = kets
    return LocalPair(psi_a, psi_b, outcome_frame, phase_a, phase_b)


@lru_cache(maxsize=None)
def _local_states(kind: BellKind, klass: ContextClass, frame: Frame) -> LocalPair:
    if frame is Frame.Y:
        rep = y_lift(kind, klass)
    else:
        rep = lift(kind, klass, CONJUGATE[frame])
    return _collapse_pair(rep, frame)


def local_states(kind: BellKind, klass: ContextClass, measurement_frame: Frame) -> LocalPair:
    """Definite local kets for a measurement frame.

    Z outcomes come from the X presentation and vice versa; Y outcomes come
    from the phase-searched Z presentation.
    """
    return _local_states(BellKind(kind), ContextClass(klass), Frame(measurement_frame))


def mixed_lift(kind: BellKind, frame_a: Frame, frame_b: Frame):
    """Always raises: there is no lift with definite outcomes in two different frames."""
    kind, frame_a, frame_b = BellKind(kind), Frame(frame_a), Frame(frame_b)
    if frame_a == frame_b:
        raise DomainError("mixed_lift needs two different frames")
    witness = is_joint_eigenvector(bell(kind), pauli(frame_a), pauli(frame_b))
    raise MixedBasisError(kind, frame_a, frame_b, witness)


def isolated_sequence(
    kind: BellKind,
    klass: ContextClass,
    device_frame: Frame,
    n: int,
    seed: int,
    ket_frame: Frame = Frame.Z,
) -> list[int]:
    """Outcomes of repeated measurements on subsystem A alone.

    A's ket is the one fixed by ``(kind, klass)`` in the ``ket_frame``
    context. A device set to that frame always returns the ket's eigenvalue;
    any other device setting draws i.i.d. Born-rule outcomes.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    device_frame, ket_frame = Frame(device_frame), Frame(ket_frame)
    psi = local_states(kind, klass, ket_frame).psi_a
    if device_frame == ket_frame:
        _, index, _ = identify_basis_ket(psi, frames=(ket_frame,))
        return [1 if index == 0 else -1] * n
    p_plus = abs(frame_ket(device_frame, 0).inner(psi)) ** 2
    rng = np.random.default_rng(seed)
    draws = rng.random(n)
    return [1 if u < p_plus else -1 for u in draws]


def all_lifts() -> list[Representative]:
    return [
        lift(kind, klass, frame)
        for kind in BellKind
        for klass in ContextClass
        for frame in (Frame.X, Frame.Z)
    ]


def same_coset(a: Representative, b: Representative) -> bool:
    return equivalent_mod_R(a.sum, b.sum)
