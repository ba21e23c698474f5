"""Ricci curvature of left-invariant metrics and the preferred-direction interface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lie import BracketTensor, ReductiveSplit, act_basis_change, killing_form
from .tensors import DegenerateTensorError, InvariantTensor


@dataclass(frozen=True)
class CurvatureReport:
    ricci_tensor: np.ndarray
    ricci_operator: np.ndarray
    scalar_curvature: float


@dataclass(frozen=True)
class PreferredDirection:
    """Right-hand side q(mu, split, gamma) of a geometric flow.

    ``alpha`` is the homogeneity degree, q(c gamma) = c**alpha q(gamma), and
    ``degree_rs`` the type (r, s) of the tensors it acts on.
    """

    evaluate: Callable[[BracketTensor, ReductiveSplit, InvariantTensor], InvariantTensor]
    alpha: float
    degree_rs: tuple
    name: str = "custom"

    def __post_init__(self):
        if not self.alpha < 1:
            raise ValueError("homogeneity degree alpha must be < 1")

    def __call__(self, mu, split, gamma):
        return self.evaluate(mu, split, gamma)


def _check_inputs(mu: BracketTensor, g) -> np.ndarray:
    g = np.asarray(g.components if isinstance(g, InvariantTensor) else g, dtype=float)
    if g.shape != (mu.total_dim, mu.total_dim):
        raise ValueError(
            "left-invariant curvature needs trivial isotropy (metric on all of g); "
            f"got metric of shape {g.shape} for a {mu.total_dim}-dim bracket")
    if np.linalg.eigvalsh(0.5 * (g + g.T)).min() <= 0:
        raise DegenerateTensorError("metric must be positive definite")
    return g


def _orthonormal_ricci(c: np.ndarray) -> np.ndarray:
    """Ricci operator for structure constants in an orthonormal basis:
    moment-map term minus half the Killing form minus the symmetric part of ad(H)."""
    m = -0.5 * np.einsum("jai,jbi->ab", c, c) + 0.25 * np.einsum("aij,bij->ab", c, c)
    b = killing_form(BracketTensor(c))
    mean_curv = np.einsum("kak->a", c)
    ad_h = np.einsum("kij,i->kj", c, mean_curv)
    return m - 0.5 * b - 0.5 * (ad_h + ad_h.T)


def ricci_leftinvariant(mu: BracketTensor, g) -> CurvatureReport:
    g = _check_inputs(mu, g)
    chol = np.linalg.cholesky(g)
    frame = np.linalg.inv(chol).T  # columns form a g-orthonormal basis
    c_on = act_basis_change(np.linalg.inv(frame), mu).components
    ric_on = _orthonormal_ricci(c_on)
    ric_op = frame @ ric_on @ np.linalg.inv(frame)
    ric = g @ ric_op
    return CurvatureReport(0.5 * (ric + ric.T), ric_op, float(np.trace(ric_op)))


def koszul_oracle(mu: BracketTensor, g) -> CurvatureReport:
    """Brute-force Ricci: Koszul formula, full Riemann tensor, trace."""
    g = _check_inputs(mu, g)
    c = mu.components
    n = mu.total_dim
    lowered = np.einsum("kij,kl->ijl", c, g)  # g(mu(e_i, e_j), e_l)
    # 2 g(nabla_i e_j, e_l) = g([i,j],l) - g([j,l],i) + g([l,i],j)
    koszul = 0.5 * (lowered - lowered.transpose(2, 0, 1) + lowered.transpose(1, 2, 0))
    ginv = np.linalg.inv(g)
    gamma = np.einsum("ijl,lk->kij", koszul, ginv)  # nabla_{e_i} e_j = gamma[:, i, j]
    nab = [gamma[:, i, :] for i in range(n)]
    riem = np.zeros((n, n, n, n))  # riem[i, j] = matrix of R(e_i, e_j)
    for i in range(n):
        for j in range(n):
            r = nab[i] @ nab[j] - nab[j] @ nab[i]
            for k in range(n):
                r -= c[k, i, j] * nab[k]
            riem[i, j] = r
    ric = np.zeros((n, n))
    for x in range(n):
        for y in range(n):
            ric[x, y] = sum(riem[z, x][z, y] for z in range(n))
    ric_op = ginv @ ric
    return CurvatureReport(ric, ric_op, float(np.trace(ric_op)))


def _ricci_evaluate(mu: BracketTensor, split: ReductiveSplit, gamma: InvariantTensor) -> InvariantTensor:
    if split.k_dim:
        raise ValueError("the Ricci direction is only implemented for trivial isotropy")
    report = ricci_leftinvariant(mu, gamma)
    return gamma.with_components(-2.0 * report.ricci_tensor)


def ricci_flow_direction() -> PreferredDirection:
    return PreferredDirection(_ricci_evaluate, alpha=0.0, degree_rs=(2, 0), name="ricci")
