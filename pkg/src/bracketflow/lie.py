"""Lie brackets stored as structure constants, and the linear algebra around them.

A bracket on a ``total_dim``-dimensional space is a dense array ``c`` with
``mu(e_i, e_j) = sum_k c[k, i, j] e_k``.  Reductive splits put the isotropy
algebra ``k`` on the first ``k_dim`` basis vectors and ``p`` on the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

RANK_RTOL = 1e-9


class DimensionError(ValueError):
    pass


def nullspace(matrix: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the kernel of ``matrix``.

    Singular values below ``rtol`` times the largest one count as zero.
    A zero matrix has the whole space as kernel.
    """
    matrix = np.atleast_2d(matrix)
    n = matrix.shape[1]
    if matrix.size == 0 or not np.any(matrix):
        return np.eye(n)
    _, sv, vh = np.linalg.svd(matrix, full_matrices=True)
    rank = int(np.sum(sv > rtol * sv[0]))
    return vh[rank:].T.copy()


def numerical_rank(matrix: np.ndarray, rtol: float = RANK_RTOL, scale: float | None = None) -> int:
    """Rank with threshold ``rtol * scale``; ``scale`` defaults to the largest singular value."""
    matrix = np.atleast_2d(matrix)
    if matrix.size == 0 or not np.any(matrix):
        return 0
    sv = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(sv > rtol * (sv[0] if scale is None else scale)))


@dataclass(frozen=True)
class BracketTensor:
    """Structure constants ``c[k, i, j]`` of a skew-symmetric bracket."""

    components: np.ndarray
    validated: bool = False

    def __post_init__(self):
        c = np.array(self.components, dtype=float)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise DimensionError(f"bracket components must be n x n x n, got {c.shape}")
        c = 0.5 * (c - c.transpose(0, 2, 1))
        c.flags.writeable = False
        object.__setattr__(self, "components", c)

    @property
    def total_dim(self) -> int:
        return self.components.shape[0]

    @classmethod
    def zero(cls, dim: int) -> BracketTensor:
        return cls(np.zeros((dim, dim, dim)), validated=True)

    @classmethod
    def from_entries(cls, dim: int, entries, validate: bool = True, tol: float = 1e-10):
        """Build from ``(i, j, k, value)`` entries meaning ``mu(e_i, e_j) += value e_k``.

        Indices are 0-based; antisymmetric completion is implied.
        """
        c = np.zeros((dim, dim, dim))
        for i, j, k, value in entries:
            c[k, i, j] += value
            c[k, j, i] -= value
        mu = cls(c)
        if validate:
            return mu.as_validated(tol)
        return mu

    def as_validated(self, tol: float = 1e-10) -> BracketTensor:
        res = jacobi_residual(self)
        scale = max(1.0, float(np.sum(self.components**2)))
        if res > tol * scale:
            raise ValueError(f"Jacobi identity fails: residual {res:.3e}")
        return BracketTensor(self.components, validated=True)

    def __call__(self, x, y) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.components, x, y)

    def ad(self, x) -> np.ndarray:
        """Matrix of ``ad_mu(x)``."""
        return np.einsum("kij,i->kj", self.components, x)

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def __add__(self, other: BracketTensor) -> BracketTensor:
        return BracketTensor(self.components + other.components)

    def __sub__(self, other: BracketTensor) -> BracketTensor:
        return BracketTensor(self.components - other.components)

    def __mul__(self, a: float) -> BracketTensor:
        return BracketTensor(a * self.components)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, BracketTensor):
            return NotImplemented
        return np.array_equal(self.components, other.components)

    def __hash__(self):
        return hash(self.components.tobytes())


@dataclass(frozen=True)
class ReductiveSplit:
    k_dim: int
    p_dim: int

    def __post_init__(self):
        if self.k_dim < 0 or self.p_dim <= 0:
            raise DimensionError(f"invalid split k={self.k_dim}, p={self.p_dim}")

    @property
    def total_dim(self) -> int:
        return self.k_dim + self.p_dim

    @property
    def k(self) -> slice:
        return slice(0, self.k_dim)

    @property
    def p(self) -> slice:
        return slice(self.k_dim, self.total_dim)

    def check(self, mu: BracketTensor) -> None:
        if mu.total_dim != self.total_dim:
            raise DimensionError(
                f"bracket has dimension {mu.total_dim}, split expects {self.total_dim}"
            )

    def embed(self, h: np.ndarray, hk: np.ndarray | None = None) -> np.ndarray:
        """Block-diagonal ``diag(hk, h)`` on g; ``hk`` defaults to the identity."""
        out = np.eye(self.total_dim)
        if hk is not None:
            out[self.k, self.k] = hk
        out[self.p, self.p] = h
        return out

    def embed_algebra(self, a: np.ndarray) -> np.ndarray:
        """``diag(0, a)`` on g, the Lie-algebra counterpart of ``embed``."""
        out = np.zeros((self.total_dim, self.total_dim))
        out[self.p, self.p] = a
        return out


@dataclass(frozen=True)
class DerivationBasis:
    elements: list = field(default_factory=list)
    restricted: bool = False

    def __len__(self):
        return len(self.elements)

    def as_array(self) -> np.ndarray:
        if not self.elements:
            return np.zeros((0, 0, 0))
        return np.array(self.elements)


def jacobi_tensor(mu: BracketTensor) -> np.ndarray:
    """``J[m, i, j, l]``: e_m-component of the cyclic sum for (e_i, e_j, e_l)."""
    c = mu.components
    t = np.einsum("aij,mal->mijl", c, c)
    return t + t.transpose(0, 2, 3, 1) + t.transpose(0, 3, 1, 2)


def jacobi_residual(mu: BracketTensor) -> float:
    n = mu.total_dim
    if n < 3:
        return 0.0
    norms = np.linalg.norm(jacobi_tensor(mu), axis=0)
    idx = np.arange(n)
    ordered = (idx[:, None, None] < idx[None, :, None]) & (idx[None, :, None] < idx[None, None, :])
    return float(np.max(norms[ordered]))


def killing_form(mu: BracketTensor) -> np.ndarray:
    c = mu.components
    b = np.einsum("kai,ibk->ab", c, c)
    return 0.5 * (b + b.T)


def theta_bracket(a: np.ndarray, mu: BracketTensor) -> BracketTensor:
    """Derivative of the basis-change action: ``A mu - mu(A., .) - mu(., A.)``."""
    c = mu.components
    out = (
        np.einsum("kl,lij->kij", a, c)
        - np.einsum("klj,li->kij", c, a)
        - np.einsum("kil,lj->kij", c, a)
    )
    return BracketTensor(out)


def derivation_operator(mu: BracketTensor) -> np.ndarray:
    """Matrix of ``D -> theta_bracket(D, mu)`` acting on row-major ``vec(D)``."""
    c = mu.components
    n = mu.total_dim
    eye = np.eye(n)
    op = (np.einsum("ka,bij->kijab", eye, c)
          - np.einsum("kaj,ib->kijab", c, eye)
          - np.einsum("kia,jb->kijab", c, eye))
    return op.reshape(n**3, n * n)


def derivation_algebra(
    mu: BracketTensor,
    split: ReductiveSplit | None = None,
    rtol: float = RANK_RTOL,
    block_form: bool = False,
) -> DerivationBasis:
    """Basis of Der(g), or of Der(g/k) = {D in Der(g): D(k) in k} when a split is given.

    With ``block_form`` every element additionally vanishes on k and has
    no k-component (the ``diag(0, D_p)`` shape).
    """
    n = mu.total_dim
    rows = [derivation_operator(mu)]
    if split is not None:
        split.check(mu)
        extra = []
        for a in range(n):
            for b in range(n):
                in_pk = a >= split.k_dim and b < split.k_dim
                in_k_rows = a < split.k_dim or b < split.k_dim
                if in_pk or (block_form and in_k_rows):
                    e = np.zeros(n * n)
                    e[a * n + b] = 1.0
                    extra.append(e)
        if extra:
            # scale constraint rows like the bracket so they are never truncated
            scale = max(1.0, mu.norm())
            rows.append(scale * np.array(extra))
    kernel = nullspace(np.vstack(rows), rtol)
    elements = [kernel[:, m].reshape(n, n) for m in range(kernel.shape[1])]
    return DerivationBasis(elements, restricted=split is not None)


def derivation_defect(d: np.ndarray, mu: BracketTensor) -> float:
    return float(np.max(np.abs(theta_bracket(d, mu).components), initial=0.0))


def act_basis_change(hbar: np.ndarray, mu: BracketTensor, split: ReductiveSplit | None = None,
                     tol: float = 1e-12) -> BracketTensor:
    """``(hbar . mu)(x, y) = hbar mu(hbar^-1 x, hbar^-1 y)``.

    When ``split`` is given, ``hbar`` must be block-diagonal with respect to it.
    """
    hbar = np.asarray(hbar, dtype=float)
    if hbar.shape != (mu.total_dim, mu.total_dim):
        raise DimensionError(f"hbar has shape {hbar.shape}")
    if split is not None:
        off = max(np.max(np.abs(hbar[split.k, split.p]), initial=0.0),
                  np.max(np.abs(hbar[split.p, split.k]), initial=0.0))
        if off > tol * max(1.0, np.max(np.abs(hbar))):
            raise ValueError("hbar is not block-diagonal with respect to the split")
    try:
        hinv = np.linalg.inv(hbar)
    except np.linalg.LinAlgError as exc:
        raise ValueError("hbar is singular") from exc
    if not np.all(np.isfinite(hinv)) or np.linalg.cond(hbar) > 1e14:
        raise ValueError("hbar is singular")
    out = np.einsum("ak,kij,ib,jd->abd", hbar, mu.components, hinv, hinv)
    return BracketTensor(out)


def scale_bracket(mu: BracketTensor, split: ReductiveSplit, c: float) -> BracketTensor:
    """The scaling ``c . mu``: identity on k x k and k x p; on p x p the k-part
    picks up ``c**2`` and the p-part ``c``."""
    if c == 0:
        raise ValueError("scaling factor must be nonzero")
    split.check(mu)
    out = np.array(mu.components)
    k, p = split.k, split.p
    out[k, p, p] *= c * c
    out[p, p, p] *= c
    return BracketTensor(out, validated=mu.validated)


def isotropy_generators(mu: BracketTensor, split: ReductiveSplit) -> np.ndarray:
    """Stack of ``ad_mu(Z)|_p`` for the basis Z of k, shape (k_dim, p_dim, p_dim)."""
    c = mu.components
    return np.array([c[split.p, z, split.p] for z in range(split.k_dim)]).reshape(
        split.k_dim, split.p_dim, split.p_dim
    )


@dataclass
class AdmissibilityReport:
    reductive: bool
    reductive_residual: float
    closed_isotropy: str
    effective: bool
    effective_rank: int
    invariant: bool
    invariance_residual: float
    jacobi: float

    @property
    def passed(self) -> bool:
        return self.reductive and self.effective and self.invariant

    def lines(self) -> list[str]:
        ok = {True: "pass", False: "FAIL"}
        return [
            f"jacobi residual: {self.jacobi:.3e}",
            f"(i)   reductive: {ok[self.reductive]} (residual {self.reductive_residual:.3e})",
            f"(ii)  closed isotropy: {self.closed_isotropy}",
            f"(iii) effective: {ok[self.effective]} (rank {self.effective_rank})",
            f"(iv)  Ad(K)-invariant tensor: {ok[self.invariant]}"
            f" (residual {self.invariance_residual:.3e})",
        ]


def check_admissibility(mu: BracketTensor, split: ReductiveSplit, gamma, tol: float = 1e-9
                        ) -> AdmissibilityReport:
    from .tensors import adk_invariance_residual

    split.check(mu)
    if gamma.p_dim != split.p_dim:
        raise DimensionError(f"tensor lives on dimension {gamma.p_dim}, p has {split.p_dim}")
    c = mu.components
    k, p = split.k, split.p
    red = max(np.max(np.abs(c[p, k, k]), initial=0.0), np.max(np.abs(c[k, k, p]), initial=0.0))
    scale = max(1.0, np.max(np.abs(c), initial=0.0))
    gens = isotropy_generators(mu, split)
    rank = numerical_rank(gens.reshape(split.k_dim, -1)) if split.k_dim else 0
    inv = adk_invariance_residual(mu, split, gamma) if red <= tol * scale else float("inf")
    return AdmissibilityReport(
        reductive=bool(red <= tol * scale),
        reductive_residual=float(red),
        closed_isotropy="not decidable numerically (closedness of K in G is assumed)",
        effective=rank == split.k_dim,
        effective_rank=rank,
        invariant=bool(inv <= tol * scale),
        invariance_residual=float(inv),
        jacobi=jacobi_residual(mu),
    )


def expm(a: np.ndarray) -> np.ndarray:
    return scipy.linalg.expm(a)
