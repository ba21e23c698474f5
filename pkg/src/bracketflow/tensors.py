"""Tensors on p, the gl(p)-representation theta, stabilizers and their complements.

Storage is covariant-first: a type (r, s) tensor has shape ``(n,) * (r + s)``
and ``gamma(e_a1, ..., e_ar) = sum T[a1..ar, b1..bs] e_b1 (x) ... (x) e_bs``.
A (1, 1) tensor ``T`` therefore stores the operator matrix transposed.

A hermitian triple is kept as one array of shape (3, n, n) holding
``(omega, g, J)`` with ``J`` in (1, 1) storage; theta and the group action act
on each part.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .lie import RANK_RTOL, BracketTensor, DimensionError, ReductiveSplit, isotropy_generators, nullspace

KINDS = ("generic", "metric", "pseudo_metric", "symplectic", "hermitian_triple", "three_form")


class DegenerateTensorError(ValueError):
    pass


class IncompatibleDirectionError(ValueError):
    """Raised when a tensor is not of the form theta(Q) gamma."""


@dataclass(frozen=True)
class InvariantTensor:
    components: np.ndarray
    r: int
    s: int = 0
    kind: str = "generic"
    signature: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown tensor kind {self.kind!r}")
        comp = np.array(self.components, dtype=float)
        expected = self.r + self.s + (1 if self.kind == "hermitian_triple" else 0)
        if comp.ndim != expected or len(set(comp.shape[-(self.r + self.s):] or (0,))) > 1:
            raise DimensionError(f"components of shape {comp.shape} do not match type ({self.r},{self.s})")
        comp.flags.writeable = False
        object.__setattr__(self, "components", comp)

    @property
    def p_dim(self) -> int:
        return self.components.shape[-1]

    def parts(self):
        """List of ``(array, r, s)`` pieces the representation acts on."""
        if self.kind == "hermitian_triple":
            omega, g, j = self.components
            return [(omega, 2, 0), (g, 2, 0), (j, 1, 1)]
        return [(self.components, self.r, self.s)]

    def flat(self) -> np.ndarray:
        return self.components.ravel()

    def with_components(self, components) -> InvariantTensor:
        return replace(self, components=np.asarray(components, dtype=float))

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def __add__(self, other):
        return self.with_components(self.components + other.components)

    def __sub__(self, other):
        return self.with_components(self.components - other.components)

    def __mul__(self, a: float):
        return self.with_components(a * self.components)

    __rmul__ = __mul__


def _theta_array(a: np.ndarray, t: np.ndarray, r: int, s: int) -> np.ndarray:
    out = np.zeros_like(t)
    for slot in range(r):
        # gamma(..., A e_a, ...) = sum_c A[c, a] T[..., c, ...]
        out -= np.moveaxis(np.tensordot(t, a, axes=([slot], [0])), -1, slot)
    for slot in range(r, r + s):
        out += np.moveaxis(np.tensordot(a, t, axes=([1], [slot])), 0, slot)
    return out


def _act_array(h: np.ndarray, hinv: np.ndarray, t: np.ndarray, r: int, s: int) -> np.ndarray:
    out = t
    for slot in range(r):
        out = np.moveaxis(np.tensordot(out, hinv, axes=([slot], [0])), -1, slot)
    for slot in range(r, r + s):
        out = np.moveaxis(np.tensordot(h, out, axes=([1], [slot])), 0, slot)
    return out


def theta_action(a: np.ndarray, gamma: InvariantTensor) -> InvariantTensor:
    """theta(A) gamma: derivation on the contravariant factors minus A fed into each slot."""
    a = np.asarray(a, dtype=float)
    if a.shape != (gamma.p_dim, gamma.p_dim):
        raise DimensionError(f"operator of shape {a.shape} on a {gamma.p_dim}-dim space")
    pieces = [_theta_array(a, t, r, s) for t, r, s in gamma.parts()]
    comp = np.array(pieces) if gamma.kind == "hermitian_triple" else pieces[0]
    return gamma.with_components(comp)


def group_action(h: np.ndarray, gamma: InvariantTensor) -> InvariantTensor:
    """h . gamma = h_s gamma(h^-1 ., ..., h^-1 .), i.e. the pullback by h^-1."""
    h = np.asarray(h, dtype=float)
    if h.shape != (gamma.p_dim, gamma.p_dim):
        raise DimensionError(f"matrix of shape {h.shape} on a {gamma.p_dim}-dim space")
    if np.linalg.cond(h) > 1e14:
        raise ValueError("h is singular")
    hinv = np.linalg.inv(h)
    pieces = [_act_array(h, hinv, t, r, s) for t, r, s in gamma.parts()]
    comp = np.array(pieces) if gamma.kind == "hermitian_triple" else pieces[0]
    return gamma.with_components(comp)


def pullback(h: np.ndarray, gamma: InvariantTensor) -> InvariantTensor:
    """h^* gamma = gamma(h ., ..., h .) (contravariant part pushed by h^-1)."""
    return group_action(np.linalg.inv(h), gamma)


# --- constructors -----------------------------------------------------------


def _is_antisymmetric(t: np.ndarray, tol: float) -> bool:
    for i in range(t.ndim - 1):
        if np.max(np.abs(t + np.swapaxes(t, i, i + 1)), initial=0.0) > tol:
            return False
    return True


def metric(g, tol: float = 1e-10) -> InvariantTensor:
    g = np.asarray(g, dtype=float)
    if np.max(np.abs(g - g.T), initial=0.0) > tol:
        raise ValueError("metric must be symmetric")
    if np.linalg.eigvalsh(g).min() <= tol:
        raise DegenerateTensorError("metric must be positive definite")
    return InvariantTensor(g, 2, 0, "metric")


def euclidean(n: int) -> InvariantTensor:
    return metric(np.eye(n))


def pseudo_metric(g, tol: float = 1e-10) -> InvariantTensor:
    g = np.asarray(g, dtype=float)
    if np.max(np.abs(g - g.T), initial=0.0) > tol:
        raise ValueError("pseudo-metric must be symmetric")
    ev = np.linalg.eigvalsh(g)
    if np.min(np.abs(ev)) <= tol:
        raise DegenerateTensorError("pseudo-metric is degenerate")
    return InvariantTensor(g, 2, 0, "pseudo_metric", (int(np.sum(ev > 0)), int(np.sum(ev < 0))))


def symplectic(omega, tol: float = 1e-10) -> InvariantTensor:
    omega = np.asarray(omega, dtype=float)
    if not _is_antisymmetric(omega, tol):
        raise ValueError("symplectic form must be antisymmetric")
    if omega.shape[0] % 2 or abs(np.linalg.det(omega)) <= tol:
        raise DegenerateTensorError("symplectic form is degenerate")
    return InvariantTensor(omega, 2, 0, "symplectic")


def standard_complex_structure(n2: int) -> np.ndarray:
    """J e_{2i} = e_{2i+1}, J e_{2i+1} = -e_{2i} (operator matrix)."""
    if n2 % 2:
        raise DimensionError("complex structure needs even dimension")
    j = np.zeros((n2, n2))
    for i in range(0, n2, 2):
        j[i + 1, i] = 1.0
        j[i, i + 1] = -1.0
    return j


def standard_symplectic(n2: int) -> InvariantTensor:
    # omega(x, y) = <J x, y>
    return symplectic(standard_complex_structure(n2).T)


def hermitian_triple(omega, g, j, tol: float = 1e-10) -> InvariantTensor:
    """Triple (omega, g, J) with J given as an operator matrix."""
    omega, g, j = (np.asarray(x, dtype=float) for x in (omega, g, j))
    metric(g, tol)
    symplectic(omega, tol)
    n = g.shape[0]
    if np.max(np.abs(j @ j + np.eye(n))) > tol:
        raise ValueError("J must square to -I")
    if np.max(np.abs(omega - j.T @ g)) > tol:
        raise ValueError("omega must equal g(J., .)")
    return InvariantTensor(np.array([omega, g, j.T]), 2, 0, "hermitian_triple")


def standard_hermitian(n2: int) -> InvariantTensor:
    j = standard_complex_structure(n2)
    g = np.eye(n2)
    return hermitian_triple(j.T @ g, g, j)


G2_TERMS = ((1, 2, 3, 1), (1, 4, 5, 1), (1, 6, 7, 1), (2, 4, 6, 1), (2, 5, 7, -1),
            (3, 4, 7, -1), (3, 5, 6, -1))


def _antisymmetrize(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    for perm in itertools.permutations(range(t.ndim)):
        out += _perm_sign(perm) * np.transpose(t, perm)
    return out / math.factorial(t.ndim)


def _perm_sign(perm) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def standard_g2_components() -> np.ndarray:
    phi = np.zeros((7, 7, 7))
    for a, b, c, sgn in G2_TERMS:
        phi[a - 1, b - 1, c - 1] = sgn
    return _antisymmetrize(phi) * 6


@lru_cache(maxsize=1)
def _perms7():
    perms = np.array(list(itertools.permutations(range(7))))
    signs = np.array([_perm_sign(p) for p in perms], dtype=float)
    return perms, signs


def g2_bilinear_form(phi: np.ndarray) -> np.ndarray:
    """B(x, y) with (i_x phi) ^ (i_y phi) ^ phi = 6 B(x, y) e^1..7."""
    perms, signs = _perms7()
    third = phi[perms[:, 4], perms[:, 5], perms[:, 6]] * signs
    b = np.zeros((7, 7))
    for x in range(7):
        ax = phi[x][perms[:, 0], perms[:, 1]]
        for y in range(x, 7):
            ay = phi[y][perms[:, 2], perms[:, 3]]
            b[x, y] = b[y, x] = np.sum(ax * ay * third) / (2 * 2 * 6) / 6
    return b


def three_form(phi, tol: float = 1e-10) -> InvariantTensor:
    phi = np.asarray(phi, dtype=float)
    if not _is_antisymmetric(phi, tol):
        raise ValueError("three-form must be antisymmetric")
    if phi.shape[0] == 7:
        ev = np.linalg.eigvalsh(g2_bilinear_form(phi))
        if not (np.all(ev > tol) or np.all(ev < -tol)):
            raise DegenerateTensorError("three-form is not of G2 type (induced form indefinite)")
    return InvariantTensor(phi, 3, 0, "three_form")


def standard_g2() -> InvariantTensor:
    return three_form(standard_g2_components())


def attached_metric(gamma: InvariantTensor) -> np.ndarray | None:
    """Positive-definite metric determined by gamma, if its kind carries one."""
    if gamma.kind == "metric":
        return np.array(gamma.components)
    if gamma.kind == "hermitian_triple":
        return np.array(gamma.components[1])
    if gamma.kind == "three_form" and gamma.p_dim == 7:
        b = g2_bilinear_form(gamma.components)
        ev = np.linalg.eigvalsh(b)
        if np.all(ev < 0):
            b, ev = -b, -ev
        if np.all(ev > 0):
            return b / np.prod(ev) ** (1.0 / 9.0)
    return None


def validate(gamma: InvariantTensor, tol: float = 1e-10) -> InvariantTensor:
    """Re-run the kind-specific symmetry and nondegeneracy checks."""
    c = gamma.components
    if gamma.kind == "metric":
        return metric(c, tol)
    if gamma.kind == "pseudo_metric":
        return pseudo_metric(c, tol)
    if gamma.kind == "symplectic":
        return symplectic(c, tol)
    if gamma.kind == "hermitian_triple":
        return hermitian_triple(c[0], c[1], c[2].T, tol)
    if gamma.kind == "three_form":
        return three_form(c, tol)
    return gamma


# --- stabilizers ------------------------------------------------------------


def theta_matrix(gamma: InvariantTensor) -> np.ndarray:
    """Matrix of A -> theta(A) gamma on row-major vec(A)."""
    n = gamma.p_dim
    cols = []
    for idx in range(n * n):
        e = np.zeros(n * n)
        e[idx] = 1.0
        cols.append(theta_action(e.reshape(n, n), gamma).flat())
    return np.array(cols).T


@dataclass(frozen=True)
class StabilizerDecomposition:
    """gl(p) = stabilizer + complement.

    The complement is orthogonal for the trace pairing taken in a frame that
    is orthonormal for the metric attached to gamma (the plain Frobenius
    pairing when no metric is attached or the metric is the identity).
    """

    stab_basis: list
    comp_basis: list
    frame: np.ndarray = field(repr=False)
    kind: str = "generic"
    invariant_complement: bool = True

    @property
    def p_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return len(self.stab_basis), len(self.comp_basis)

    def _to_frame(self, a):
        return np.linalg.solve(self.frame, a @ self.frame)

    def _from_frame(self, a):
        return self.frame @ a @ np.linalg.inv(self.frame)

    @property
    def _stab_onb(self) -> np.ndarray:
        vecs = np.array([self._to_frame(s).ravel() for s in self.stab_basis]).reshape(
            len(self.stab_basis), -1)
        if not len(vecs):
            return vecs
        q, _ = np.linalg.qr(vecs.T)
        return q.T


def stabilizer_algebra(gamma: InvariantTensor, rtol: float = RANK_RTOL) -> StabilizerDecomposition:
    validate(gamma)
    n = gamma.p_dim
    stab = nullspace(theta_matrix(gamma), rtol)
    g = attached_metric(gamma)
    frame = np.eye(n) if g is None else np.linalg.inv(np.linalg.cholesky(g)).T
    finv = np.linalg.inv(frame)
    stab_frame = np.array([(finv @ stab[:, m].reshape(n, n) @ frame).ravel()
                           for m in range(stab.shape[1])]).reshape(stab.shape[1], n * n)
    comp_frame = nullspace(stab_frame, rtol) if len(stab_frame) else np.eye(n * n)
    stab_basis = [stab[:, m].reshape(n, n) for m in range(stab.shape[1])]
    comp_basis = [frame @ comp_frame[:, m].reshape(n, n) @ finv for m in range(comp_frame.shape[1])]
    return StabilizerDecomposition(
        stab_basis, comp_basis, frame, gamma.kind,
        invariant_complement=gamma.kind != "pseudo_metric",
    )


def project_to_complement(a: np.ndarray, dec: StabilizerDecomposition) -> np.ndarray:
    """Component of A in the complement, along the stabilizer."""
    a_frame = dec._to_frame(np.asarray(a, dtype=float)).ravel()
    onb = dec._stab_onb
    if len(onb):
        a_frame = a_frame - onb.T @ (onb @ a_frame)
    n = dec.p_dim
    return dec._from_frame(a_frame.reshape(n, n))


def project_to_stabilizer(a: np.ndarray, dec: StabilizerDecomposition) -> np.ndarray:
    return np.asarray(a, dtype=float) - project_to_complement(a, dec)


def solve_operator_from_tensor(gamma: InvariantTensor, q, dec: StabilizerDecomposition | None = None,
                               tol: float = 1e-8) -> np.ndarray:
    """The unique Q in the complement with theta(Q) gamma = q."""
    if dec is None:
        dec = stabilizer_algebra(gamma)
    target = q.flat() if isinstance(q, InvariantTensor) else np.ravel(q)
    n = gamma.p_dim
    if not dec.comp_basis:
        return np.zeros((n, n))
    m = np.array([theta_action(c, gamma).flat() for c in dec.comp_basis]).T
    coef, *_ = np.linalg.lstsq(m, target, rcond=None)
    resid = np.linalg.norm(m @ coef - target)
    if resid > tol * max(1.0, np.linalg.norm(target)):
        raise IncompatibleDirectionError(
            f"tensor is not in theta(gl(p)) gamma (least-squares residual {resid:.3e})")
    return np.tensordot(coef, np.array(dec.comp_basis), axes=1)


# --- homogeneous-space data -------------------------------------------------


def adk_invariance_residual(mu: BracketTensor, split: ReductiveSplit, gamma: InvariantTensor) -> float:
    """max over a basis Z of k of |theta(ad Z|_p) gamma|."""
    if split.k_dim == 0:
        return 0.0
    return float(max(theta_action(z, gamma).norm() for z in isotropy_generators(mu, split)))


def exterior_differential(mu: BracketTensor, split: ReductiveSplit, gamma: InvariantTensor,
                          tol: float = 1e-10) -> InvariantTensor:
    """d gamma(X_1..X_{k+1}) = sum_{i<j} (-1)^(i+j) gamma(mu(X_i, X_j)_p, X_1, ^i, ^j, ...)."""
    t = np.asarray(gamma.components)
    if gamma.s != 0 or not _is_antisymmetric(t, tol * max(1.0, gamma.norm())):
        raise ValueError("exterior differential needs an antisymmetric covariant tensor")
    split.check(mu)
    deg = gamma.r
    cp = mu.components[split.p, split.p, split.p]  # cp[c, a, b]: e_c-part of mu(e_a, e_b)
    n = split.p_dim
    out = np.zeros((n,) * (deg + 1))
    for i in range(deg + 1):
        for j in range(i + 1, deg + 1):
            term = np.tensordot(cp, t, axes=([0], [0]))  # axes: X_i, X_j, rest...
            out += (-1) ** (i + j) * np.moveaxis(term, [0, 1], [i, j])
    return InvariantTensor(out, deg + 1, 0, "generic")


def is_in_normalizer(h: np.ndarray, mu: BracketTensor, split: ReductiveSplit, tol: float = 1e-9
                     ) -> tuple[bool, float]:
    """Whether h (ad k|_p) h^-1 stays inside ad k|_p; returns (verdict, residual)."""
    h = np.asarray(h, dtype=float)
    if np.linalg.cond(h) > 1e14:
        raise ValueError("h is singular")
    if split.k_dim == 0:
        return True, 0.0
    gens = isotropy_generators(mu, split).reshape(split.k_dim, -1)
    hinv = np.linalg.inv(h)
    worst = 0.0
    for z in isotropy_generators(mu, split):
        conj = (h @ z @ hinv).ravel()
        coef, *_ = np.linalg.lstsq(gens.T, conj, rcond=None)
        worst = max(worst, float(np.linalg.norm(gens.T @ coef - conj)))
    scale = max(1.0, float(np.max(np.abs(gens))))
    return worst <= tol * scale, worst
