"""Geometric flow, bracket flow, their normalizations and the coupling ODEs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .curvature import PreferredDirection
from .integrate import IntegrationError, IntegratorConfig, Solution, StepStats, hermite, solve
from .lie import (
    BracketTensor,
    ReductiveSplit,
    act_basis_change,
    check_admissibility,
    derivation_operator,
    jacobi_residual,
    theta_bracket,
)
from .tensors import (
    DegenerateTensorError,
    InvariantTensor,
    adk_invariance_residual,
    attached_metric,
    pullback,
    solve_operator_from_tensor,
    stabilizer_algebra,
)

NONDEGENERACY_FLOOR = 1e-8
INVARIANT_TOL = 1e-7
DET_FLOOR = 1e-12
ORBIT_COND_MAX = 1e12
LIFT_RCOND = 1e-10
FIT_STEPS = 30


class FlowError(RuntimeError):
    pass


@dataclass
class FlowTrajectory:
    """Accepted steps of a flow; ``states[i]`` has the shape of the flowing object."""

    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray = field(repr=False)
    step_stats: StepStats
    halt_reason: str
    kind: str
    aux: np.ndarray | None = None
    aux_derivatives: np.ndarray | None = field(default=None, repr=False)
    blowup_exponent: float | None = None
    blowup_time: float | None = None
    template: object = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states.reshape(len(self), -1), axis=1)

    @property
    def steps(self) -> np.ndarray:
        return np.concatenate([[0.0], np.abs(np.diff(self.times))])

    def _interp(self, values, derivs, t):
        times = self.times
        lo, hi = min(times[0], times[-1]), max(times[0], times[-1])
        scale = max(1.0, abs(lo), abs(hi))
        if t < lo - 1e-12 * scale or t > hi + 1e-12 * scale:
            raise ValueError(f"t={t} outside trajectory range [{lo}, {hi}]")
        hit = np.flatnonzero(np.abs(times - t) <= 1e-12 * scale)
        if len(hit):
            return values[hit[0]]
        order = np.argsort(times)
        ts = times[order]
        i = int(np.clip(np.searchsorted(ts, t) - 1, 0, len(ts) - 2))
        a, b = order[i], order[i + 1]
        return hermite(times[a], values[a], derivs[a], times[b], values[b], derivs[b], t)

    def at(self, t: float) -> np.ndarray:
        """State at ``t``: the sample if one lands there, cubic Hermite otherwise."""
        return self._interp(self.states, self.derivatives, t)

    def aux_at(self, t: float) -> np.ndarray:
        if self.aux is None:
            raise ValueError("trajectory carries no coupling matrices")
        return self._interp(self.aux, self.aux_derivatives, t)

    def bracket_at(self, t: float) -> BracketTensor:
        return BracketTensor(self.at(t))

    def tensor_at(self, t: float) -> InvariantTensor:
        return self.template.with_components(self.at(t))

    @property
    def final(self):
        if self.kind == "bracket":
            return BracketTensor(self.states[-1])
        return self.template.with_components(self.states[-1])

    def to_csv(self, path) -> None:
        flat = self.states.reshape(len(self), -1)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"x{i}" for i in range(flat.shape[1])] + ["norm", "step"])
            for t, row, nrm, st in zip(self.times, flat, self.norms, self.steps):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row]
                                + [repr(float(nrm)), repr(float(st))])


def _t_span(t_span):
    t0, t1 = (0.0, float(t_span)) if np.isscalar(t_span) else (float(t_span[0]), float(t_span[1]))
    return t0, t1


def _min_metric_eig(gamma: InvariantTensor):
    if gamma.kind in ("metric", "hermitian_triple"):
        g = attached_metric(gamma)
        return float(np.linalg.eigvalsh(0.5 * (g + g.T)).min())
    return None


def operator_of(gamma: InvariantTensor, q: InvariantTensor, dec=None) -> np.ndarray:
    return solve_operator_from_tensor(gamma, q, dec if dec is not None else stabilizer_algebra(gamma))


def bracket_velocity(mu: BracketTensor, split: ReductiveSplit, gamma: InvariantTensor,
                     direction: PreferredDirection, dec=None):
    """Bracket-flow velocity and the operator Q_mu that drives it."""
    q = operator_of(gamma, direction(mu, split, gamma), dec)
    return -theta_bracket(split.embed_algebra(q), mu).components, q


def _fit_blowup(sol: Solution, norm_of):
    """Fit |y| ~ C (T - t)^p from x / x' being linear in t over the last steps."""
    n = min(FIT_STEPS, len(sol.times))
    ts = sol.times[-n:]
    ys = sol.states[-n:]
    fs = sol.derivatives[-n:]
    x = np.array([norm_of(y) for y in ys])
    dx = np.array([np.dot(y, f) / norm_of(y) for y, f in zip(ys, fs)])
    u = x / dx
    slope, intercept = np.polyfit(ts, u, 1)
    return 1.0 / slope, -intercept / slope


def _trajectory(sol: Solution, kind: str, template, size: int, shape, aux_shape=None):
    states = sol.states[:, :size].reshape((len(sol.times),) + tuple(shape))
    derivs = sol.derivatives[:, :size].reshape(states.shape)
    aux = aux_d = None
    if aux_shape is not None:
        aux = sol.states[:, size:].reshape((len(sol.times),) + tuple(aux_shape))
        aux_d = sol.derivatives[:, size:].reshape(aux.shape)
    return FlowTrajectory(sol.times, states, derivs, sol.stats, sol.halt_reason, kind,
                          aux, aux_d, template=template)


def integrate_geometric_flow(gamma0: InvariantTensor, mu: BracketTensor, direction: PreferredDirection,
                             t_span, cfg: IntegratorConfig | None = None, split: ReductiveSplit | None = None,
                             t_eval=None, coupling: bool = False) -> FlowTrajectory:
    """d gamma / dt = q(gamma) with the bracket fixed.

    With ``coupling`` the matrix h(t) solving h' = -h Q_gamma(t) is co-integrated
    and stored in ``aux``.
    """
    cfg = cfg or IntegratorConfig()
    split = split or ReductiveSplit(0, gamma0.p_dim)
    split.check(mu)
    floor = _min_metric_eig(gamma0)
    if floor is not None and floor <= NONDEGENERACY_FLOOR:
        raise DegenerateTensorError("initial tensor is degenerate")
    shape = gamma0.components.shape
    size = gamma0.components.size
    n = gamma0.p_dim

    def rhs(y):
        gamma = gamma0.with_components(y[:size].reshape(shape))
        try:
            q = direction(mu, split, gamma)
        except (DegenerateTensorError, np.linalg.LinAlgError):
            return np.full(len(y), np.nan)
        if not coupling:
            return q.flat()
        h = y[size:].reshape(n, n)
        return np.concatenate([q.flat(), (-h @ operator_of(gamma, q)).ravel()])

    def admissible(y):
        eig = _min_metric_eig(gamma0.with_components(y[:size].reshape(shape)))
        return eig is None or eig > NONDEGENERACY_FLOOR

    def on_accept(t, y):
        if coupling and abs(np.linalg.det(y[size:].reshape(n, n))) < DET_FLOOR:
            raise FlowError(f"coupling matrix became singular at t={t}")

    y0 = gamma0.flat() if not coupling else np.concatenate([gamma0.flat(), np.eye(n).ravel()])
    t0, t1 = _t_span(t_span)
    sol = solve(rhs, t0, y0, t1, cfg, admissible=admissible, on_accept=on_accept, t_eval=t_eval,
                norm=lambda y: np.linalg.norm(y[:size]))
    traj = _trajectory(sol, "tensor", gamma0, size, shape, (n, n) if coupling else None)
    if sol.halt_reason == "blow-up":
        traj.blowup_exponent, traj.blowup_time = _fit_blowup(
            Solution(sol.times, sol.states[:, :size], sol.derivatives[:, :size]), np.linalg.norm)
    return traj


def integrate_bracket_flow(mu0: BracketTensor, split: ReductiveSplit, gamma: InvariantTensor,
                           direction: PreferredDirection, t_span, cfg: IntegratorConfig | None = None,
                           t_eval=None, normalized: bool = False, coupling: bool = False,
                           monitor: bool = True, method: str | None = None,
                           hbar0: np.ndarray | None = None) -> FlowTrajectory:
    """d mu / dt = -theta(diag(0, Q_mu)) mu with gamma fixed.

    ``normalized`` removes the radial part of the velocity so |mu| is kept;
    ``coupling`` co-integrates h' = -Q_mu h into ``aux``.

    ``method="direct"`` integrates the structure constants.  ``method="orbit"``
    integrates H in GL(g) and sets mu = H . mu0, lifting each velocity by the
    minimum-norm generator X with theta(X) mu = theta(M) mu.  The bracket then
    cannot leave the orbit of mu0, and H comes to rest when mu does.  Limits of
    the normalized flow repel transversally to their orbit, so the direct
    method lets round-off grow exponentially there; "orbit" is its default.
    ``hbar0`` starts the flow at hbar0 . mu0 while keeping mu0 as the base of
    the orbit, so an exactly representable bracket can carry a float twist.
    """
    cfg = cfg or IntegratorConfig()
    method = method or ("orbit" if normalized and not coupling else "direct")
    if method not in ("direct", "orbit"):
        raise ValueError(f"unknown method {method!r}")
    if method == "orbit" and coupling:
        raise ValueError("coupling matrices are only co-integrated by the direct method")
    dim = split.total_dim
    size = dim**3
    n = split.p_dim
    H0 = np.eye(dim) if hbar0 is None else np.asarray(hbar0, dtype=float)
    start = mu0 if hbar0 is None else act_basis_change(H0, mu0, split)
    report = check_admissibility(start, split, gamma)
    if not report.passed:
        raise ValueError("input data is not admissible:\n" + "\n".join(report.lines()))
    if hbar0 is not None and method == "direct":
        mu0 = start
    dec = stabilizer_algebra(gamma)

    def velocity(mu_flat):
        mu = BracketTensor(mu_flat.reshape(dim, dim, dim))
        vel, q = bracket_velocity(mu, split, gamma, direction, dec)
        vel = vel.ravel()
        sq = np.dot(mu_flat, mu_flat)
        lam = np.dot(vel, mu_flat) / sq if normalized and sq > 0 else 0.0
        return vel - lam * mu_flat, q, lam

    def monitor_bracket(t, mu):
        scale = max(1.0, mu.norm() ** 2)
        jac = jacobi_residual(mu) / scale
        if jac > INVARIANT_TOL:
            raise FlowError(f"Jacobi residual escaped to {jac:.3e} at t={t}; tighten tolerances")
        if split.k_dim:
            inv = adk_invariance_residual(mu, split, gamma) / max(1.0, mu.norm())
            if inv > INVARIANT_TOL:
                raise FlowError(f"Ad(K)-invariance escaped to {inv:.3e} at t={t}")

    t0, t1 = _t_span(t_span)
    if method == "orbit":
        def orbit_point(y):
            return act_basis_change(y.reshape(dim, dim), mu0).components.ravel()

        def rhs(y):
            H = y.reshape(dim, dim)
            try:
                mu_flat = orbit_point(y)
                _, q, lam = velocity(mu_flat)
            except (ValueError, np.linalg.LinAlgError):
                return np.full(len(y), np.nan)
            M = split.embed_algebra(q) - lam * np.eye(dim)
            theta = derivation_operator(BracketTensor(mu_flat.reshape(dim, dim, dim)))
            X = np.linalg.lstsq(theta, theta @ M.ravel(), rcond=LIFT_RCOND)[0].reshape(dim, dim)
            return (-X @ H).ravel()

        def on_accept(t, y):
            if np.linalg.cond(y.reshape(dim, dim)) > ORBIT_COND_MAX:
                raise FlowError(f"orbit matrix became singular at t={t}")
            if monitor:
                monitor_bracket(t, BracketTensor(orbit_point(y).reshape(dim, dim, dim)))
            return None

        sol = solve(rhs, t0, H0.ravel(), t1, cfg, on_accept=on_accept, t_eval=t_eval,
                    norm=lambda y: np.linalg.norm(orbit_point(y)))
        mus = np.array([orbit_point(y) for y in sol.states])
        vels = np.array([velocity(m)[0] for m in mus])
        traj = FlowTrajectory(sol.times, mus.reshape(-1, dim, dim, dim), vels.reshape(-1, dim, dim, dim),
                              sol.stats, sol.halt_reason, "bracket")
        flat = Solution(sol.times, mus, vels)
    else:
        def rhs(y):
            vel, q, _ = velocity(y[:size])
            if not coupling:
                return vel
            return np.concatenate([vel, (-q @ y[size:].reshape(n, n)).ravel()])

        def on_accept(t, y):
            if coupling and abs(np.linalg.det(y[size:].reshape(n, n))) < DET_FLOOR:
                raise FlowError(f"coupling matrix became singular at t={t}")
            if monitor:
                monitor_bracket(t, BracketTensor(y[:size].reshape(dim, dim, dim)))
            return None

        y0 = mu0.components.ravel()
        if coupling:
            y0 = np.concatenate([y0, np.eye(n).ravel()])
        sol = solve(rhs, t0, y0, t1, cfg, on_accept=on_accept, t_eval=t_eval,
                    norm=lambda y: np.linalg.norm(y[:size]))
        traj = _trajectory(sol, "bracket", None, size, (dim, dim, dim), (n, n) if coupling else None)
        flat = Solution(sol.times, sol.states[:, :size], sol.derivatives[:, :size])
    if sol.halt_reason in ("blow-up", "step underflow") and not normalized and len(sol.times) > 3:
        traj.blowup_exponent, traj.blowup_time = _fit_blowup(flat, np.linalg.norm)
    return traj


def normalized_bracket_flow(mu0, split, gamma, direction, t_span, cfg=None, t_eval=None,
                            method: str = "orbit", hbar0=None) -> FlowTrajectory:
    return integrate_bracket_flow(mu0, split, gamma, direction, t_span, cfg, t_eval, normalized=True,
                                  method=method, hbar0=hbar0)


def integrate_coupling(variant: str, mu: BracketTensor, split: ReductiveSplit, gamma: InvariantTensor,
                       direction: PreferredDirection, t_span, cfg: IntegratorConfig | None = None,
                       t_eval=None) -> FlowTrajectory:
    """Co-integrate h(t) with its driving flow.

    ``tensor_side``: h' = -h Q_gamma(t) alongside the geometric flow.
    ``bracket_side``: h' = -Q_mu(t) h alongside the bracket flow.
    The returned trajectory holds the flow in ``states`` and h(t) in ``aux``.
    """
    if variant == "tensor_side":
        return integrate_geometric_flow(gamma, mu, direction, t_span, cfg, split, t_eval, coupling=True)
    if variant == "bracket_side":
        return integrate_bracket_flow(mu, split, gamma, direction, t_span, cfg, t_eval, coupling=True)
    raise ValueError(f"unknown coupling variant {variant!r}")


def verify_equivalence(traj_gamma: FlowTrajectory, traj_mu: FlowTrajectory, traj_h: FlowTrajectory,
                       mu0: BracketTensor, gamma0: InvariantTensor, split: ReductiveSplit | None = None
                       ) -> tuple[float, float]:
    """Max over the tensor-flow samples of |h(t)^* gamma0 - gamma(t)| and |hbar(t) . mu0 - mu(t)|."""
    split = split or ReductiveSplit(mu0.total_dim - gamma0.p_dim, gamma0.p_dim)
    lo = max(min(tr.times[0], tr.times[-1]) for tr in (traj_gamma, traj_mu, traj_h))
    hi = min(max(tr.times[0], tr.times[-1]) for tr in (traj_gamma, traj_mu, traj_h))
    if hi < lo:
        raise ValueError("trajectories do not share a time interval")
    grid = [t for t in traj_gamma.times if lo - 1e-12 <= t <= hi + 1e-12]
    if not grid:
        raise ValueError("no common samples after resampling")
    res_gamma = res_mu = 0.0
    for t in grid:
        h = traj_h.aux_at(t)
        g_t = traj_gamma.at(t)
        res_gamma = max(res_gamma, float(np.linalg.norm(pullback(h, gamma0).components - g_t)))
        mu_t = act_basis_change(split.embed(h), mu0).components
        res_mu = max(res_mu, float(np.linalg.norm(mu_t - traj_mu.at(t))))
    return res_gamma, res_mu


__all__ = [
    "FlowError",
    "FlowTrajectory",
    "IntegrationError",
    "IntegratorConfig",
    "bracket_velocity",
    "integrate_bracket_flow",
    "integrate_coupling",
    "integrate_geometric_flow",
    "normalized_bracket_flow",
    "operator_of",
    "verify_equivalence",
]
