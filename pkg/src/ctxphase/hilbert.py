"""Qubit and qubit-pair linear algebra.

Amplitudes are always stored in the computational (Z) basis; the X and Y
frames are views built on top of that single representation.
"""

from __future__ import annotations

import cmath
import math
from enum import Enum
from typing import Optional, Union

import numpy as np

ARITH_TOL = 1e-12
COMPOSE_TOL = 1e-9
EIGEN_TOL = 1e-10

_SQRT1_2 = 1 / math.sqrt(2)


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class Frame(str, Enum):
    Z = "Z"
    X = "X"
    Y = "Y"


class BellKind(str, Enum):
    PHI_PLUS = "PHI_PLUS"
    PHI_MINUS = "PHI_MINUS"
    PSI_PLUS = "PSI_PLUS"
    PSI_MINUS = "PSI_MINUS"


# Columns are the frame's |0> and |1> in Z amplitudes.
_FRAME_BASES = {
    Frame.Z: np.array([[1, 0], [0, 1]], dtype=complex),
    Frame.X: np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2,
    Frame.Y: np.array([[1, 1], [1j, -1j]], dtype=complex) * _SQRT1_2,
}

PAULI = {
    Frame.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    Frame.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Frame.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
}


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class _StateVector:
    __slots__ = ("amps",)
    dim = 0

    def __init__(self, amps, normalize: bool = True):
        arr = np.array(amps, dtype=complex).reshape(self.dim)
        if not np.all(np.isfinite(arr)):
            raise DomainError("amplitudes must be finite")
        if normalize:
            norm = np.linalg.norm(arr)
            if norm <= ARITH_TOL:
                raise DomainError("cannot normalize the zero vector")
            arr = arr / norm
        self.amps = _frozen(arr)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def inner(self, other) -> complex:
        """<self|other>"""
        return complex(np.vdot(self.amps, other.amps))

    def scaled(self, factor: complex):
        return type(self)(self.amps * factor, normalize=False)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amps, dtype=dtype)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return bool(np.allclose(self.amps, other.amps, rtol=0, atol=ARITH_TOL))

    __hash__ = None

    def __repr__(self):
        body = ", ".join(_fmt_complex(a) for a in self.amps)
        return f"{type(self).__name__}({body})"


def _fmt_complex(z: complex) -> str:
    z = complex(z)
    if abs(z.imag) <= ARITH_TOL:
        return f"{z.real:.6g}"
    if abs(z.real) <= ARITH_TOL:
        return f"{z.imag:.6g}j"
    return f"({z.real:.6g}{z.imag:+.6g}j)"


class Ket(_StateVector):
    """Single-qubit state, amplitudes (amp0, amp1) on |0>, |1>."""

    __slots__ = ()
    dim = 2


class TensorState(_StateVector):
    """Two-qubit state, amplitudes ordered (0,0), (0,1), (1,0), (1,1)."""

    __slots__ = ()
    dim = 4

    @property
    def matrix(self) -> np.ndarray:
        """Amplitude matrix M[i][j] = amps[(i, j)]."""
        return self.amps.reshape(2, 2)

    @classmethod
    def product(cls, a: Ket, b: Ket) -> "TensorState":
        return cls(np.kron(a.amps, b.amps), normalize=False)


def frame_basis(frame: Frame) -> np.ndarray:
    return _FRAME_BASES[Frame(frame)]


def _check_unit(phase: complex, what: str = "phase") -> complex:
    phase = complex(phase)
    if not cmath.isfinite(phase) or abs(abs(phase) - 1) > ARITH_TOL:
        raise DomainError(f"{what} must have unit modulus, got {phase!r}")
    return phase


def frame_ket(frame: Frame, index: int, phase: complex = 1) -> Ket:
    """``phase`` times the ``index``-th basis ket of ``frame``."""
    if index not in (0, 1):
        raise DomainError(f"basis index must be 0 or 1, got {index!r}")
    phase = _check_unit(phase)
    return Ket(frame_basis(frame)[:, index] * phase, normalize=False)


def bell(kind: BellKind) -> TensorState:
    kind = BellKind(kind)
    amps = {
        BellKind.PHI_PLUS: (1, 0, 0, 1),
        BellKind.PHI_MINUS: (1, 0, 0, -1),
        BellKind.PSI_PLUS: (0, 1, 1, 0),
        BellKind.PSI_MINUS: (0, 1, -1, 0),
    }[kind]
    return TensorState(np.array(amps, dtype=complex) * _SQRT1_2, normalize=False)


def sigma_theta(theta: float) -> np.ndarray:
    """Polarizer observable at angle ``theta``: eigenvalues +1 and -1."""
    if not math.isfinite(theta):
        raise DomainError("theta must be finite")
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return _frozen(np.array([[c, s], [s, -c]], dtype=complex))


def pauli(frame: Frame) -> np.ndarray:
    return PAULI[Frame(frame)]


def is_hermitian(op: np.ndarray, tol: float = ARITH_TOL) -> bool:
    op = np.asarray(op)
    return bool(np.allclose(op, op.conj().T, rtol=0, atol=tol))


def equal_up_to_global_phase(a, b, tol: float = COMPOSE_TOL) -> bool:
    if type(a) is not type(b):
        raise TypeError("cannot compare a Ket with a TensorState")
    return abs(a.inner(b)) >= 1 - tol


def expand_in_frame(state: TensorState, frame: Frame) -> np.ndarray:
    """Coefficients c_ij on |i_F> (x) |j_F>, flattened in (i, j) order."""
    basis = frame_basis(frame)
    change = np.kron(basis, basis)
    return _frozen(change.conj().T @ state.amps)


def reconstruct_from_frame(coeffs, frame: Frame) -> TensorState:
    basis = frame_basis(frame)
    amps = np.kron(basis, basis) @ np.asarray(coeffs, dtype=complex)
    return TensorState(amps, normalize=False)


def is_joint_eigenvector(
    state: TensorState, op_a: np.ndarray, op_b: np.ndarray, tol: float = EIGEN_TOL
) -> Optional[Union[float, complex]]:
    """Eigenvalue of ``op_a (x) op_b`` on ``state``, or None if it is not an eigenvector."""
    image = np.kron(op_a, op_b) @ state.amps
    lam = complex(np.vdot(state.amps, image)) / complex(np.vdot(state.amps, state.amps))
    if np.linalg.norm(image - lam * state.amps) > tol:
        return None
    if abs(lam.imag) <= tol:
        return lam.real
    return lam


def amplitude_det(state: TensorState) -> complex:
    return complex(np.linalg.det(state.matrix))


def is_maximally_entangled(state: TensorState, tol: float = COMPOSE_TOL) -> bool:
    return abs(abs(amplitude_det(state)) - 0.5) <= tol


def identify_basis_ket(ket: Ket, frames=(Frame.Z, Frame.X, Frame.Y), tol: float = COMPOSE_TOL):
    """Return ``(frame, index, phase)`` if ``ket`` is a frame basis ket up to phase."""
    for frame in frames:
        basis = frame_basis(frame)
        for index in (0, 1):
            overlap = complex(np.vdot(basis[:, index], ket.amps))
            if abs(overlap) >= 1 - tol and abs(ket.norm() - 1) <= tol:
                return Frame(frame), index, overlap / abs(overlap)
    return None


def canonical_phase(ket: Ket, tol: float = ARITH_TOL) -> tuple[Ket, complex]:
    """Strip the global phase so the leading amplitude is real and non-negative.

    Returns ``(canonical, phase)`` with ``phase * canonical == ket``.
    """
    for amp in ket.amps:
        if abs(amp) > tol:
            phase = complex(amp) / abs(amp)
            return Ket(ket.amps / phase, normalize=False), phase
    raise DomainError("zero ket has no canonical phase")


def expectation(ket: Ket, op: np.ndarray) -> float:
    return float(np.real(np.vdot(ket.amps, np.asarray(op) @ ket.amps)))
