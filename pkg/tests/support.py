"""Shared brackets, tensors and directions for the test suite."""

from __future__ import annotations

import numpy as np
from scipy.stats import ortho_group

from bracketflow import (
    BracketTensor,
    InvariantTensor,
    PreferredDirection,
    ReductiveSplit,
    act_basis_change,
    killing_form,
    ricci_flow_direction,
)

SEEDS = (0, 1, 2, 3, 4)
RICCI = ricci_flow_direction()


def heisenberg() -> BracketTensor:
    return BracketTensor.from_entries(3, [(0, 1, 2, 1)])


def su2() -> BracketTensor:
    return BracketTensor.from_entries(3, [(0, 1, 2, 1), (1, 2, 0, 1), (0, 2, 1, -1)])


def abelian(n: int) -> BracketTensor:
    return BracketTensor.zero(n)


def heisenberg_plus_r() -> BracketTensor:
    return BracketTensor.from_entries(4, [(0, 1, 2, 1)])


def filiform(a: float = 2.0) -> BracketTensor:
    return BracketTensor.from_entries(4, [(0, 1, 2, 1), (0, 2, 3, a)])


def heisenberg_plus_r3() -> BracketTensor:
    return BracketTensor.from_entries(6, [(0, 1, 2, 1)])


def so3_semidirect_r3() -> BracketTensor:
    """so(3) on e0..e2 acting on R^3 = span(e3, e4, e5) by rotations."""
    return BracketTensor.from_entries(6, [
        (0, 1, 2, 1), (1, 2, 0, 1), (0, 2, 1, -1),
        (0, 4, 5, 1), (0, 5, 4, -1), (1, 5, 3, 1),
        (1, 3, 5, -1), (2, 3, 4, 1), (2, 4, 3, -1),
    ])


def sphere2() -> BracketTensor:
    """so(3) with k = span(e0) and p = span(e1, e2)."""
    return BracketTensor.from_entries(3, [(1, 2, 0, 1), (0, 1, 2, 1), (0, 2, 1, -1)])


def solvable_diag(a: float, b: float) -> BracketTensor:
    """diag(a, b) acting on R^2 = span(e0, e1) through e2."""
    return BracketTensor.from_entries(3, [(0, 2, 0, -a), (1, 2, 1, -b)])


def nonnormal_solvable() -> BracketTensor:
    """ad(e2) acts on span(e0, e1) by a Jordan block; not a soliton for the round metric."""
    return BracketTensor.from_entries(3, [(0, 2, 0, -1), (1, 2, 1, -1), (1, 2, 0, -1)])


def cyclic_pattern(s0: float, s1: float, s2: float) -> BracketTensor:
    """[e0,e1]=s0 e2, [e0,e2]=s1 e1, [e1,e2]=s2 e0: a Lie bracket for every choice of signs."""
    return BracketTensor.from_entries(3, [(0, 1, 2, s0), (0, 2, 1, s1), (1, 2, 0, s2)], validate=False)


def broken_jacobi() -> BracketTensor:
    """[e0,e1]=e2, [e0,e2]=e0: the cyclic sum on (e0,e1,e2) is -e2, residual exactly 1."""
    return BracketTensor.from_entries(3, [(0, 1, 2, 1), (0, 2, 0, 1)], validate=False)


def unimodular(seed: int) -> BracketTensor:
    """Milnor-type unimodular bracket with random constants in a random (non-orthogonal) basis."""
    rng = np.random.default_rng(seed)
    lam = rng.uniform(-1, 1, 3)
    mu = BracketTensor.from_entries(3, [(1, 2, 0, lam[0]), (0, 2, 1, -lam[1]), (0, 1, 2, lam[2])])
    return act_basis_change(np.eye(3) + 0.3 * rng.standard_normal((3, 3)), mu)


def random_metric(n: int, rng) -> np.ndarray:
    m = rng.standard_normal((n, n))
    return m @ m.T + n * np.eye(n)


def random_orthogonal(n: int, seed: int) -> np.ndarray:
    return ortho_group.rvs(n, random_state=seed)


def random_bracket_corpus(count: int, seed: int = 0):
    """Orthogonally conjugated Heisenberg, su(2)-type and diag(a,b) solvable brackets of dims 3 to 5."""
    rng = np.random.default_rng(seed)
    out = []
    for m in range(count):
        family = m % 3
        if family == 0:
            base = heisenberg() if m % 2 == 0 else BracketTensor.from_entries(5, [(0, 1, 2, 1), (0, 2, 3, 1)])
        elif family == 1:
            base = su2() if m % 2 == 0 else BracketTensor(np.pad(su2().components, ((0, 1),) * 3))
        else:
            a, b = rng.uniform(0.2, 2.0, 2)
            base = solvable_diag(a, b)
        n = base.total_dim
        out.append(act_basis_change(random_orthogonal(n, int(rng.integers(1 << 30))), base))
    return out


def _killing_evaluate(mu: BracketTensor, split: ReductiveSplit, gamma: InvariantTensor) -> InvariantTensor:
    b = killing_form(mu)[split.p, split.p]
    return gamma.with_components(b)


def killing_direction() -> PreferredDirection:
    """q = B|_p: independent of gamma (alpha = 0) and Ad(K)-invariant, so usable with k_dim > 0."""
    return PreferredDirection(_killing_evaluate, alpha=0.0, degree_rs=(2, 0), name="killing")


def zero_direction() -> PreferredDirection:
    return PreferredDirection(lambda mu, split, gamma: gamma * 0.0, alpha=0.0, degree_rs=(2, 0), name="zero")


def split0(n: int) -> ReductiveSplit:
    return ReductiveSplit(0, n)


def unit_ray(states) -> np.ndarray:
    flat = np.asarray(states).reshape(len(states), -1)
    return flat / np.linalg.norm(flat, axis=1)[:, None]

