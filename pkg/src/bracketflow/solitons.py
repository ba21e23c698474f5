"""Soliton certificates, closed-form self-similar evolutions and flow diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .curvature import PreferredDirection
from .flows import FlowTrajectory, IntegratorConfig, integrate_geometric_flow, operator_of
from .lie import (
    BracketTensor,
    ReductiveSplit,
    act_basis_change,
    derivation_algebra,
    derivation_defect,
    expm,
    killing_form,
    numerical_rank,
    scale_bracket,
)
from .tensors import (
    InvariantTensor,
    StabilizerDecomposition,
    attached_metric,
    group_action,
    project_to_complement,
    stabilizer_algebra,
    theta_action,
)

SOLITON_RTOL = 1e-8
ALGEBRAIC_TOL = 1e-8
FIXED_POINT_TOL = 1e-6
DIAGONAL_TOL = 1e-7


@dataclass(frozen=True)
class SolitonCertificate:
    """Witness of Q = c' I + proj(D_p) for a derivation D of (g, k)."""

    c_prime: float
    flow_constant_c: float
    D: np.ndarray
    residual: float
    is_algebraic: bool
    soliton_type: str
    A: np.ndarray
    Q: np.ndarray
    alpha: float
    degree_rs: tuple
    k_dim: int
    d00: bool
    c_prime_unique: bool = True

    @property
    def D_p(self) -> np.ndarray:
        return self.D[self.k_dim:, self.k_dim:]

    @property
    def is_soliton(self) -> bool:
        return self.soliton_type != "not_a_soliton"

    def recompute_residual(self, dec: StabilizerDecomposition) -> float:
        n = self.Q.shape[0]
        return float(np.linalg.norm(self.Q - self.c_prime * np.eye(n) - project_to_complement(self.D_p, dec)))

    def in_block_form(self, tol: float = 1e-10) -> bool:
        k = self.k_dim
        scale = max(1.0, float(np.max(np.abs(self.D), initial=0.0)))
        return k == 0 or (np.max(np.abs(self.D[:k, :]), initial=0.0) <= tol * scale
                          and np.max(np.abs(self.D[:, :k]), initial=0.0) <= tol * scale)

    def to_record(self) -> str:
        def rows(m):
            return ";".join(",".join(repr(float(v)) for v in row) for row in np.atleast_2d(m))

        fields = [
            ("c_prime", repr(float(self.c_prime))),
            ("flow_constant_c", repr(float(self.flow_constant_c))),
            ("soliton_type", self.soliton_type),
            ("residual", repr(float(self.residual))),
            ("is_algebraic", str(self.is_algebraic).lower()),
            ("D", rows(self.D)),
            ("A", rows(self.A)),
        ]
        return "\n".join(f"{k}={v}" for k, v in fields)


def _type_of(c: float, scale: float) -> str:
    if abs(c) <= 1e-10 * scale:
        return "steady"
    return "expanding" if c > 0 else "shrinking"


def _default_d00(mu: BracketTensor, split: ReductiveSplit, gamma: InvariantTensor) -> bool:
    if split.k_dim == 0:
        return True
    b = killing_form(mu)
    mixed = np.max(np.abs(b[split.k, split.p]), initial=0.0)
    return attached_metric(gamma) is not None and mixed <= 1e-10 * max(1.0, np.max(np.abs(b)))


def solve_semi_algebraic(mu: BracketTensor, split: ReductiveSplit, gamma: InvariantTensor,
                         direction: PreferredDirection, d00: bool | None = None,
                         dec: StabilizerDecomposition | None = None) -> SolitonCertificate:
    """Least-squares solution of Q_gamma = c' I + proj(D_p) over c' and D in Der(g/k)."""
    split.check(mu)
    r, s = direction.degree_rs
    if s == r:
        raise ValueError("the soliton constant needs r != s")
    if d00 is None:
        d00 = _default_d00(mu, split, gamma)
    dec = dec or stabilizer_algebra(gamma)
    q_op = operator_of(gamma, direction(mu, split, gamma), dec)
    n = split.p_dim
    p = split.p
    basis = derivation_algebra(mu, split, block_form=d00).elements
    proj_cols = [project_to_complement(d[p, p], dec).ravel() for d in basis]
    cols = np.array([np.eye(n).ravel()] + proj_cols).T
    coef, *_ = np.linalg.lstsq(cols, q_op.ravel(), rcond=None)
    c_prime = float(coef[0])
    dim = split.total_dim
    d = np.tensordot(coef[1:], np.array(basis), axes=1) if basis else np.zeros((dim, dim))
    ref = max(1.0, float(np.linalg.norm(cols, 2)))
    unique = not basis or numerical_rank(cols, scale=ref) > numerical_rank(cols[:, 1:], scale=ref)

    # move D along derivations whose p-block lies in the stabilizer, towards D_p = proj(D_p)
    if basis:
        stab_part = lambda m: m[p, p] - project_to_complement(m[p, p], dec)  # noqa: E731
        pcols = np.array(proj_cols).T
        _, sv, vh = np.linalg.svd(pcols, full_matrices=True)
        rank = int(np.sum(sv > 1e-9 * ref))
        kernel = vh[rank:]
        if len(kernel):
            ws = [np.tensordot(v, np.array(basis), axes=1) for v in kernel]
            m = np.array([stab_part(w).ravel() for w in ws]).T
            x, *_ = np.linalg.lstsq(m, stab_part(d).ravel(), rcond=None)
            d = d - np.tensordot(x, np.array(ws), axes=1)

    dp = d[p, p]
    proj_dp = project_to_complement(dp, dec)
    resid_mat = q_op - c_prime * np.eye(n) - proj_dp
    residual = float(np.linalg.norm(resid_mat))
    scale = np.linalg.norm(q_op) + 1.0
    flow_c = (s - r) * c_prime
    is_sol = residual < SOLITON_RTOL * scale
    alg_gap = float(np.linalg.norm(proj_dp - dp))
    return SolitonCertificate(
        c_prime=c_prime,
        flow_constant_c=flow_c,
        D=d,
        residual=residual,
        is_algebraic=bool(is_sol and alg_gap < ALGEBRAIC_TOL * max(1.0, np.linalg.norm(dp))),
        soliton_type=_type_of(flow_c, scale) if is_sol else "not_a_soliton",
        A=dp - proj_dp,
        Q=q_op,
        alpha=direction.alpha,
        degree_rs=(r, s),
        k_dim=split.k_dim,
        d00=d00,
        c_prime_unique=bool(unique),
    )


def check_algebraic(cert: SolitonCertificate, dec: StabilizerDecomposition,
                    tol: float = ALGEBRAIC_TOL) -> tuple[bool, float]:
    """Whether the certificate's own D_p already lies in the complement."""
    dp = cert.D_p
    gap = float(np.linalg.norm(project_to_complement(dp, dec) - dp))
    return gap < tol * max(1.0, np.linalg.norm(dp)), gap


def with_derivation(cert: SolitonCertificate, d: np.ndarray, dec: StabilizerDecomposition
                    ) -> SolitonCertificate:
    """Copy of ``cert`` carrying another derivation, with residual and flags recomputed."""
    k = cert.k_dim
    dp = d[k:, k:]
    proj_dp = project_to_complement(dp, dec)
    n = dp.shape[0]
    residual = float(np.linalg.norm(cert.Q - cert.c_prime * np.eye(n) - proj_dp))
    alg = float(np.linalg.norm(proj_dp - dp)) < ALGEBRAIC_TOL * max(1.0, np.linalg.norm(dp))
    return SolitonCertificate(cert.c_prime, cert.flow_constant_c, np.array(d), residual, alg,
                              cert.soliton_type, dp - proj_dp, cert.Q, cert.alpha,
                              cert.degree_rs, k, cert.d00, cert.c_prime_unique)


@dataclass(frozen=True)
class ScalingPair:
    """c(t) and s(t) of the self-similar evolution for constant ``c`` and degree ``alpha``."""

    flow_constant_c: float
    alpha: float

    def __post_init__(self):
        if not self.alpha < 1:
            raise ValueError("alpha must be < 1")

    @property
    def domain(self) -> tuple[float, float]:
        c = self.flow_constant_c
        if c == 0:
            return (-math.inf, math.inf)
        t_end = 1.0 / ((1 - self.alpha) * abs(c))
        return (-t_end, math.inf) if c > 0 else (-math.inf, t_end)

    def _base(self, t: float) -> float:
        lo, hi = self.domain
        if not lo < t < hi:
            raise ValueError(f"t={t} outside the maximal interval ({lo}, {hi})")
        return (1 - self.alpha) * self.flow_constant_c * t + 1

    def c_of_t(self, t: float) -> float:
        return self._base(t) ** (1 / (1 - self.alpha))

    def s_of_t(self, t: float) -> float:
        base = self._base(t)
        c = self.flow_constant_c
        if c == 0:
            return float(t)
        return math.log(base) / ((1 - self.alpha) * c)


def scaling_pair(flow_constant_c: float, alpha: float) -> ScalingPair:
    return ScalingPair(float(flow_constant_c), float(alpha))


def _pair(cert: SolitonCertificate) -> ScalingPair:
    return scaling_pair(cert.flow_constant_c, cert.alpha)


def self_similar_solution(gamma: InvariantTensor, cert: SolitonCertificate, t: float) -> InvariantTensor:
    """gamma(t) = c(t) exp(s(t) D_p) . gamma."""
    if not cert.is_soliton:
        raise ValueError("certificate does not certify a soliton")
    pair = _pair(cert)
    return pair.c_of_t(t) * group_action(expm(pair.s_of_t(t) * cert.D_p), gamma)


def closed_form_bracket_evolution(mu: BracketTensor, split: ReductiveSplit, cert: SolitonCertificate,
                                  t: float, degree_rs: tuple | None = None) -> BracketTensor:
    """mu(t) = c(t)^(1/(s-r)) . (diag(I, exp(s(t) A)) . mu), the outer scaling acting on brackets."""
    if not cert.is_soliton:
        raise ValueError("certificate does not certify a soliton")
    if not cert.in_block_form():
        raise ValueError("closed form needs a derivation of the diag(0, D_p) shape")
    r, s = degree_rs or cert.degree_rs
    pair = _pair(cert)
    rotated = act_basis_change(split.embed(expm(pair.s_of_t(t) * cert.A)), mu)
    return scale_bracket(rotated, split, pair.c_of_t(t) ** (1.0 / (s - r)))


def closed_form_coupling(cert: SolitonCertificate, t: float) -> np.ndarray:
    """h(t) = c(t)^(1/(r-s)) exp(s(t) A) exp(-s(t) D_p)."""
    r, s = cert.degree_rs
    pair = _pair(cert)
    st = pair.s_of_t(t)
    return pair.c_of_t(t) ** (1.0 / (r - s)) * expm(st * cert.A) @ expm(-st * cert.D_p)


def _scmu_deviation(mu0: BracketTensor, mu_t: BracketTensor, split: ReductiveSplit) -> float:
    target = mu_t.components / mu_t.norm()

    def dev(logc, sign):
        fitted = scale_bracket(mu0, split, sign * math.exp(logc))
        return float(np.linalg.norm(fitted.components / fitted.norm() - target))

    best = math.inf
    for sign in (1.0, -1.0):
        res = scipy.optimize.minimize_scalar(lambda x: dev(x, sign), bounds=(-30, 30), method="bounded",
                                             options={"xatol": 1e-12})
        best = min(best, res.fun, dev(0.0, sign))
    return best


def detect_fixed_point_up_to_scaling(traj: FlowTrajectory, split: ReductiveSplit | None = None,
                                     tol: float = FIXED_POINT_TOL) -> tuple[bool, float]:
    """Max deviation of mu(t) from the scaling ray through mu(0)."""
    if traj.kind != "bracket" or len(traj) < 2:
        raise ValueError("need a bracket trajectory with at least two samples")
    if np.any(traj.norms == 0):
        raise ValueError("zero bracket in trajectory")
    mu0 = BracketTensor(traj.states[0])
    worst = 0.0
    for state in traj.states[1:]:
        mu_t = BracketTensor(state)
        if split is None or split.k_dim == 0:
            dev = float(np.linalg.norm(mu_t.components / mu_t.norm() - mu0.components / mu0.norm()))
        else:
            dev = _scmu_deviation(mu0, mu_t, split)
        worst = max(worst, dev)
    return worst < tol, worst


# --- dynamics of exp(s A) ---------------------------------------------------


def convergents(x: float, max_den: int):
    """Continued-fraction convergents p/q of x with q <= max_den."""
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    rest = x
    for _ in range(64):
        a = math.floor(rest)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > max_den:
            return
        yield h1, k1
        frac = rest - a
        if frac < 1e-300:
            return
        rest = 1.0 / frac


def is_rational(x: float, tol: float = 1e-9, max_coeff: int = 10**6) -> tuple[bool, tuple | None]:
    """Look for q x - p = 0 within ``tol`` with 1 <= q <= max_coeff."""
    for p, q in convergents(x, max_coeff):
        if abs(q * x - p) < tol:
            return True, (p, q)
    return False, None


def frequencies(a: np.ndarray, zero_tol: float = 1e-9) -> np.ndarray:
    ev = np.linalg.eigvals(np.asarray(a, dtype=float))
    scale = max(1.0, float(np.max(np.abs(ev), initial=0.0)))
    return np.sort(ev.imag[ev.imag > zero_tol * scale])


def classify_A_dynamics(a: np.ndarray, tol: float = 1e-9, max_coeff: int = 10**6) -> str:
    """trivial / periodic / quasi_periodic behaviour of exp(s A) for antisymmetric A.

    Periodic means every frequency ratio a_j / a_1 is rational.
    """
    a = np.asarray(a, dtype=float)
    if np.max(np.abs(a + a.T), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(a), initial=0.0)):
        raise ValueError("A must be antisymmetric")
    freqs = frequencies(a)
    if len(freqs) == 0:
        return "trivial"
    for f in freqs[1:]:
        if not is_rational(f / freqs[0], tol, max_coeff)[0]:
            return "quasi_periodic"
    return "periodic"


# --- flow diagonal ----------------------------------------------------------


@dataclass(frozen=True)
class FlowDiagonalResult:
    diagonal: bool
    max_offdiagonal: float
    closed_form_residual: float | None
    basis: np.ndarray
    trajectory: FlowTrajectory


def flow_diagonal_test(mu: BracketTensor, split: ReductiveSplit, gamma: InvariantTensor,
                       direction: PreferredDirection, t_span, cfg: IntegratorConfig | None = None,
                       t_eval=None, cert: SolitonCertificate | None = None,
                       tol: float = DIAGONAL_TOL) -> FlowDiagonalResult:
    """Integrate the geometric flow and measure how far Q_gamma(t) is from diagonal
    in an orthonormal eigenbasis of Q_gamma."""
    g = attached_metric(gamma)
    frame = np.eye(gamma.p_dim) if g is None else np.linalg.inv(np.linalg.cholesky(g)).T
    q0 = operator_of(gamma, direction(mu, split, gamma))
    q0_frame = np.linalg.solve(frame, q0 @ frame)
    if np.max(np.abs(q0_frame - q0_frame.T)) > 1e-9 * max(1.0, np.max(np.abs(q0_frame))):
        raise ValueError("Q_gamma is not symmetric")
    _, vecs = np.linalg.eigh(0.5 * (q0_frame + q0_frame.T))
    beta = frame @ vecs
    beta_inv = np.linalg.inv(beta)
    traj = integrate_geometric_flow(gamma, mu, direction, t_span, cfg, split, t_eval)
    worst = 0.0
    closed = None
    pair = _pair(cert) if cert is not None and cert.is_soliton else None
    for t, state in zip(traj.times, traj.states):
        gamma_t = gamma.with_components(state)
        q_t = operator_of(gamma_t, direction(mu, split, gamma_t))
        in_beta = beta_inv @ q_t @ beta
        worst = max(worst, float(np.max(np.abs(in_beta - np.diag(np.diag(in_beta))))))
        if pair is not None:
            st = pair.s_of_t(t)
            pred = pair.c_of_t(t) ** (cert.alpha - 1) * expm(st * cert.D_p) @ q0 @ expm(-st * cert.D_p)
            closed = max(closed or 0.0, float(np.max(np.abs(pred - q_t))))
    return FlowDiagonalResult(worst < tol, worst, closed, beta, traj)


def rebuild_direction(gamma: InvariantTensor, cert: SolitonCertificate, dec: StabilizerDecomposition
                      ) -> InvariantTensor:
    """theta(c' I + proj(D_p)) gamma, which should reproduce q(gamma)."""
    n = gamma.p_dim
    return theta_action(cert.c_prime * np.eye(n) + project_to_complement(cert.D_p, dec), gamma)


def derivation_check(cert: SolitonCertificate, mu: BracketTensor) -> float:
    return derivation_defect(cert.D, mu)
