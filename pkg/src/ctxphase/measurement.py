"""Observables: per-class joint outcomes, class ensembles, correlations, CHSH."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np

from .contextual import ContextClass, ContextualError, lift, local_states
from .hilbert import (
    COMPOSE_TOL,
    BellKind,
    DomainError,
    Frame,
    Ket,
    bell,
    expand_in_frame,
    expectation,
    frame_basis,
    pauli,
)
from .oracle import oracle_correlation, oracle_correlation_grid
from .streams import class_draws

FRAME_ANGLES = {Frame.Z: 0.0, Frame.X: math.pi / 4}


class Method(str, Enum):
    ANALYTIC_EQ26 = "analytic_eq26"
    ORACLE = "oracle"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class Setting:
    """A polarizer setting, given either as a frame or as an angle in radians."""

    frame: Optional[Frame] = None
    angle: Optional[float] = None

    def __post_init__(self):
        if (self.frame is None) == (self.angle is None):
            raise DomainError("a setting is either a frame or an angle")
        if self.frame is not None:
            object.__setattr__(self, "frame", Frame(self.frame))

    @property
    def theta(self) -> float:
        if self.angle is not None:
            return float(self.angle)
        try:
            return FRAME_ANGLES[self.frame]
        except KeyError:
            raise DomainError(f"frame {self.frame.value} has no polarizer angle") from None

    def __str__(self):
        return self.frame.value if self.frame is not None else f"{math.degrees(self.angle):g}deg"


@dataclass(frozen=True)
class OutcomeRecord:
    pair_id: int
    klass: ContextClass
    setting_a: Setting
    setting_b: Setting
    a: int
    b: int

    def as_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "klass": self.klass.value,
            "setting_a": str(self.setting_a),
            "setting_b": str(self.setting_b),
            "a": self.a,
            "b": self.b,
        }


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    method: Method
    n: Optional[int] = None
    seed: Optional[int] = None
    stderr: Optional[float] = None
    terms: Optional[tuple] = None  # two diagonal, then two off-diagonal

    def __post_init__(self):
        if abs(self.value) > 1 + 1e-12:
            raise ValueError(f"correlation {self.value} outside [-1, 1]")

    @property
    def diagonal(self) -> Optional[float]:
        return None if self.terms is None else self.terms[0] + self.terms[1]

    @property
    def off_diagonal(self) -> Optional[float]:
        return None if self.terms is None else self.terms[2] + self.terms[3]


def eigenvalue(ket: Ket, frame: Frame) -> int:
    value = expectation(ket, pauli(frame))
    if abs(abs(value) - 1) > COMPOSE_TOL:
        raise ContextualError(f"{ket!r} is not an eigenket of sigma_{Frame(frame).value}")
    return 1 if value > 0 else -1


@lru_cache(maxsize=None)
def _joint_outcome(kind: BellKind, klass: ContextClass, frame: Frame) -> tuple[int, int]:
    pair = local_states(kind, klass, frame)
    return eigenvalue(pair.psi_a, frame), eigenvalue(pair.psi_b, frame)


def joint_outcome(kind: BellKind, klass: ContextClass, frame: Frame) -> tuple[int, int]:
    """Deterministic (a, b) for one context class measured in ``frame`` on both sides."""
    return _joint_outcome(BellKind(kind), ContextClass(klass), Frame(frame))


@dataclass
class Ensemble:
    records: list
    estimate: CorrelationEstimate
    class1_count: int
    counts: dict  # (a, b) -> count
    mean_a: float
    mean_b: float

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def class1_fraction(self) -> float:
        return self.class1_count / self.n


def estimate_from_products(products: np.ndarray, seed: Optional[int] = None) -> CorrelationEstimate:
    products = np.asarray(products, dtype=float)
    n = len(products)
    if n == 0:
        raise ValueError("no samples")
    stderr = float(np.std(products, ddof=1) / math.sqrt(n)) if n > 1 else None
    return CorrelationEstimate(float(products.mean()), Method.MONTE_CARLO, n, seed, stderr)


def sample_ensemble(kind: BellKind, frame: Frame, n: int, seed: int) -> Ensemble:
    """Draw a context class per pair and read off its deterministic joint outcome."""
    if n < 1:
        raise DomainError("n must be at least 1")
    kind, frame = BellKind(kind), Frame(frame)
    bits = class_draws(seed, n, context=frame.name)
    out1 = joint_outcome(kind, ContextClass.CLASS1, frame)
    out2 = joint_outcome(kind, ContextClass.CLASS2, frame)
    a = np.where(bits == 0, out1[0], out2[0]).astype(int)
    b = np.where(bits == 0, out1[1], out2[1]).astype(int)
    setting = Setting(frame=frame)
    klasses = (ContextClass.CLASS1, ContextClass.CLASS2)
    records = [
        OutcomeRecord(i, klasses[bit], setting, setting, int(x), int(y))
        for i, (bit, x, y) in enumerate(zip(bits.tolist(), a.tolist(), b.tolist()))
    ]
    counts = {ab: 0 for ab in ((1, 1), (1, -1), (-1, 1), (-1, -1))}
    for x, y in zip(a.tolist(), b.tolist()):
        counts[(x, y)] += 1
    return Ensemble(
        records=records,
        estimate=estimate_from_products(a * b, seed),
        class1_count=int(np.count_nonzero(bits == 0)),
        counts=counts,
        mean_a=float(a.mean()),
        mean_b=float(b.mean()),
    )


# -- the four-term correlation expansion -------------------------------------


def _sigma_parts(bra: np.ndarray, ket: np.ndarray) -> tuple[complex, complex]:
    """(<bra|Z|ket>, <bra|X|ket>); sigma_theta = cos 2t Z + sin 2t X."""
    return (
        complex(np.vdot(bra, pauli(Frame.Z) @ ket)),
        complex(np.vdot(bra, pauli(Frame.X) @ ket)),
    )


def _sigma_element(bra, ket, theta):
    z, x = _sigma_parts(bra, ket)
    return np.cos(2 * theta) * z + np.sin(2 * theta) * x


def decomposition(kind: BellKind, presentation_frame: Frame, source: str = "canonical"):
    """Vectors (u_A, v_B, x_A, y_B) with Psi = (u_A v_B + x_A y_B) / sqrt 2.

    ``source`` is ``"canonical"`` (the Bell state expanded in the frame) or
    ``"class1"`` / ``"class2"`` (the tabulated pre-image, signs kept on the
    symbols).
    """
    kind, frame = BellKind(kind), Frame(presentation_frame)
    if source == "canonical":
        coeffs = expand_in_frame(bell(kind), frame)
        basis = frame_basis(frame)
        pairs = [(i, j, coeffs[2 * i + j]) for i in (0, 1) for j in (0, 1)]
        pairs = [p for p in pairs if abs(p[2]) > COMPOSE_TOL]
        if len(pairs) != 2:
            raise DomainError(f"{kind.value} is not a two-term sum in frame {frame.value}")
        (i1, j1, c1), (i2, j2, c2) = pairs
        r2 = math.sqrt(2)
        return basis[:, i1], r2 * c1 * basis[:, j1], basis[:, i2], r2 * c2 * basis[:, j2]
    klass = {"class1": ContextClass.CLASS1, "class2": ContextClass.CLASS2}[source]
    (_, p), (_, q) = lift(kind, klass, frame).sum.terms
    return p.a.vector(), p.b.vector(), q.a.vector(), q.b.vector()


def eq26_terms(u, v, x, y, alpha, beta) -> tuple:
    """The four summands: two diagonal, then two off-diagonal."""
    return (
        0.5 * _sigma_element(u, u, alpha) * _sigma_element(v, v, beta),
        0.5 * _sigma_element(x, x, alpha) * _sigma_element(y, y, beta),
        0.5 * _sigma_element(u, x, alpha) * _sigma_element(v, y, beta),
        0.5 * _sigma_element(x, u, alpha) * _sigma_element(y, v, beta),
    )


def correlation_eq26(
    kind: BellKind,
    presentation_frame: Frame,
    alpha: float,
    beta: float,
    source: str = "canonical",
) -> CorrelationEstimate:
    """Correlation <sigma_alpha (x) sigma_beta> assembled from the four-term expansion."""
    u, v, x, y = decomposition(kind, presentation_frame, source)
    terms = tuple(float(np.real(t)) for t in eq26_terms(u, v, x, y, alpha, beta))
    return CorrelationEstimate(sum(terms), Method.ANALYTIC_EQ26, terms=terms)


def correlation_eq26_grid(kind, presentation_frame, alphas, betas, source: str = "canonical"):
    """Vectorized expansion on the outer grid; returns (total, diagonal, off_diagonal)."""
    u, v, x, y = decomposition(kind, presentation_frame, source)
    a = np.asarray(alphas, dtype=float)[:, None]
    b = np.asarray(betas, dtype=float)[None, :]
    t = [np.real(term) for term in eq26_terms(u, v, x, y, a, b)]
    diag, off = t[0] + t[1], t[2] + t[3]
    return diag + off, diag, off


def oracle_estimate(kind: BellKind, alpha: float, beta: float) -> CorrelationEstimate:
    return CorrelationEstimate(oracle_correlation(bell(kind), alpha, beta), Method.ORACLE)


# -- CHSH ---------------------------------------------------------------------


def chsh_correlations(kind: BellKind, a: float, a2: float, b: float, b2: float) -> tuple:
    state = bell(kind)
    return tuple(
        oracle_correlation(state, x, y) for x, y in ((a, b), (a, b2), (a2, b), (a2, b2))
    )


def chsh_combination(e_ab, e_ab2, e_a2b, e_a2b2):
    return e_ab - e_ab2 + e_a2b + e_a2b2


def chsh(kind: BellKind, a: float, a2: float, b: float, b2: float) -> float:
    return chsh_combination(*chsh_correlations(kind, a, a2, b, b2))


def local_deterministic_chsh_values() -> list[int]:
    """S for every deterministic +-1 assignment to the four settings."""
    return [
        chsh_combination(x * y, x * y2, x2 * y, x2 * y2)
        for x, x2, y, y2 in product((1, -1), repeat=4)
    ]


# -- closed forms -------------------------------------------------------------


def _c2(z):
    return np.cos(2 * z)


DERIVED_FORM: Callable = lambda a, b: _c2(a - b)  # derived for PHI_PLUS
DERIVED_FORM_KIND = BellKind.PHI_PLUS
LISTED_FORMS = {
    BellKind.PSI_PLUS: lambda a, b: _c2(a - b),
    BellKind.PSI_MINUS: lambda a, b: _c2(a + b),
    BellKind.PHI_PLUS: lambda a, b: -_c2(a + b),
    BellKind.PHI_MINUS: lambda a, b: -_c2(a - b),
}
FORM_TEXT = {
    "derived": "cos 2(a-b)",
    BellKind.PSI_PLUS: "cos 2(a-b)",
    BellKind.PSI_MINUS: "cos 2(a+b)",
    BellKind.PHI_PLUS: "-cos 2(a+b)",
    BellKind.PHI_MINUS: "-cos 2(a-b)",
}


def closed_form_report(step_deg: float = 5.0, tol: float = 1e-12) -> list[dict]:
    """Compare both published closed-form families with the oracle, per Bell state."""
    grid = np.radians(np.arange(0.0, 180.0 + step_deg / 2, step_deg))
    A, B = np.meshgrid(grid, grid, indexing="ij")
    truth = {k: oracle_correlation_grid(bell(k), grid, grid) for k in BellKind}
    rows = []
    for kind in BellKind:
        derived_err = float(np.max(np.abs(DERIVED_FORM(A, B) - truth[kind])))
        listed = LISTED_FORMS[kind](A, B)
        listed_err = float(np.max(np.abs(listed - truth[kind])))
        listed_fits = [
            k.value for k in BellKind if np.max(np.abs(listed - truth[k])) <= tol
        ]
        rows.append(
            {
                "kind": kind.value,
                "derived_form": FORM_TEXT["derived"],
                "derived_max_err": derived_err,
                "derived_matches": derived_err <= tol,
                "listed_form": FORM_TEXT[kind],
                "listed_max_err": listed_err,
                "listed_matches": listed_err <= tol,
                "listed_form_fits": listed_fits,
            }
        )
    return rows


# -- nonseparability ------------------------------------------------------------


@dataclass(frozen=True)
class SeparabilityWitness:
    max_abs_det: float
    offsets_deg: tuple
    bound: float

    @property
    def certified(self) -> bool:
        return self.max_abs_det > self.bound


def nonseparability_witness(
    correlation: Callable[[float, float], float],
    alpha0: float = 0.0,
    beta0: float = math.pi / 8,
    eps: float = 0.1,
    step_deg: float = 1.0,
    span_deg: float = 180.0,
) -> SeparabilityWitness:
    """Search 2x2 minors anchored at (alpha0, beta0) on a degree grid.

    If E(a, b) = f(a) g(b) + err with |f|, |g| <= 1 and |err| <= eps, every
    2x2 minor of E has |det| <= 4 eps + 2 eps^2. A minor exceeding that
    bound rules out any such product fit.
    """
    offsets = np.radians(np.arange(step_deg, span_deg, step_deg))
    alphas = np.concatenate([[alpha0], alpha0 + offsets])
    betas = np.concatenate([[beta0], beta0 + offsets])
    E = np.array([[correlation(a, b) for b in betas] for a in alphas], dtype=float)
    dets = E[0, 0] * E[1:, 1:] - E[0, 1:][None, :] * E[1:, 0][:, None]
    k, m = np.unravel_index(np.argmax(np.abs(dets)), dets.shape)
    return SeparabilityWitness(
        float(abs(dets[k, m])),
        (float((k + 1) * step_deg), float((m + 1) * step_deg)),
        4 * eps + 2 * eps ** 2,
    )
