"""Standard Born-rule reference for two-qubit pure states.

Deliberately independent of the free-vector-space and contextual layers;
only the basic state types and polarizer observables are shared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import ARITH_TOL, DomainError, TensorState, sigma_theta

_I2 = np.eye(2, dtype=complex)
OUTCOMES = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def projector(observable: np.ndarray, outcome: int) -> np.ndarray:
    """Spectral projector (I + outcome * O) / 2 of a +-1-valued observable."""
    if outcome not in (1, -1):
        raise DomainError(f"outcome must be +1 or -1, got {outcome!r}")
    return (_I2 + outcome * np.asarray(observable)) / 2


@dataclass(frozen=True)
class JointDistribution:
    probs: dict  # (a, b) -> probability

    def __getitem__(self, key):
        return self.probs[key]

    def correlation(self) -> float:
        return sum(a * b * p for (a, b), p in self.probs.items())

    def marginal_a(self, a: int) -> float:
        return sum(p for (x, _), p in self.probs.items() if x == a)

    def marginal_b(self, b: int) -> float:
        return sum(p for (_, y), p in self.probs.items() if y == b)

    def support(self, tol: float = ARITH_TOL) -> set:
        return {ab for ab, p in self.probs.items() if p > tol}


def born_joint_ops(state: TensorState, obs_a: np.ndarray, obs_b: np.ndarray) -> JointDistribution:
    psi = state.amps
    probs = {}
    for a, b in OUTCOMES:
        proj = np.kron(projector(obs_a, a), projector(obs_b, b))
        probs[(a, b)] = float(np.real(np.vdot(psi, proj @ psi)))
    return JointDistribution(probs)


def born_joint(state: TensorState, alpha: float, beta: float) -> JointDistribution:
    """Joint outcome distribution for polarizers at ``alpha`` (A) and ``beta`` (B)."""
    return born_joint_ops(state, sigma_theta(alpha), sigma_theta(beta))


def oracle_correlation(state: TensorState, alpha: float, beta: float) -> float:
    psi = state.amps
    op = np.kron(sigma_theta(alpha), sigma_theta(beta))
    return float(np.real(np.vdot(psi, op @ psi)))


def oracle_correlation_grid(state: TensorState, alphas, betas) -> np.ndarray:
    """Correlation on the outer grid ``alphas x betas`` by direct contraction."""
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)

    def ops(thetas):
        c, s = np.cos(2 * thetas), np.sin(2 * thetas)
        return np.stack([np.stack([c, s], -1), np.stack([s, -c], -1)], -2).astype(complex)

    m = state.matrix
    # <psi| A (x) B |psi> = sum conj(m_ij) A_ik B_jl m_kl
    return np.real(np.einsum("ij,aik,bjl,kl->ab", m.conj(), ops(alphas), ops(betas), m))


def textbook_collapse(state: TensorState, side: str, theta: float, outcome: int) -> TensorState:
    """Projective post-measurement state after one side reads ``outcome``."""
    proj = projector(sigma_theta(theta), outcome)
    if side == "A":
        full = np.kron(proj, _I2)
    elif side == "B":
        full = np.kron(_I2, proj)
    else:
        raise DomainError(f"side must be 'A' or 'B', got {side!r}")
    image = full @ state.amps
    p = float(np.real(np.vdot(image, image)))
    if p <= ARITH_TOL:
        raise DomainError(f"outcome {outcome:+d} has zero probability at theta={theta}")
    return TensorState(image / np.sqrt(p), normalize=False)


def outcome_probability(state: TensorState, side: str, theta: float, outcome: int) -> float:
    dist = born_joint(state, theta, theta)
    if side == "A":
        return dist.marginal_a(outcome)
    return dist.marginal_b(outcome)
