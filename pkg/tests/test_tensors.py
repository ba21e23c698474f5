import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bracketflow import (
    DegenerateTensorError,
    IncompatibleDirectionError,
    InvariantTensor,
    ReductiveSplit,
    adk_invariance_residual,
    euclidean,
    exterior_differential,
    group_action,
    hermitian_triple,
    is_in_normalizer,
    koszul_oracle,
    metric,
    pseudo_metric,
    pullback,
    solve_operator_from_tensor,
    stabilizer_algebra,
    standard_g2,
    standard_hermitian,
    standard_symplectic,
    symplectic,
    theta_action,
    three_form,
)
from bracketflow.lie import expm
from bracketflow.tensors import project_to_complement, project_to_stabilizer, standard_complex_structure

from support import (
    SEEDS,
    abelian,
    heisenberg,
    random_metric,
    so3_semidirect_r3,
    sphere2,
    unimodular,
)

seeds = settings(max_examples=len(SEEDS), deadline=None, derandomize=True)


def random_tensor(kind: str, rng) -> InvariantTensor:
    if kind == "metric":
        return metric(random_metric(4, rng))
    if kind == "symplectic":
        h = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
        return group_action(h, standard_symplectic(4))
    if kind == "three_form":
        h = np.eye(7) + 0.1 * rng.standard_normal((7, 7))
        return group_action(h, standard_g2())
    if kind == "vector":
        return InvariantTensor(rng.standard_normal(4), 0, 1)
    if kind == "mixed":
        return InvariantTensor(rng.standard_normal((3, 3, 3)), 2, 1)
    raise ValueError(kind)


KINDS = ("metric", "symplectic", "three_form", "vector", "mixed")


# theta representation

@pytest.mark.parametrize("kind", KINDS)
def test_theta_identity_scales_by_type(kind):
    gamma = random_tensor(kind, np.random.default_rng(0))
    out = theta_action(np.eye(gamma.p_dim), gamma)
    np.testing.assert_allclose(out.components, (gamma.s - gamma.r) * gamma.components, atol=1e-12)


def test_theta_zero():
    gamma = standard_g2()
    assert theta_action(np.zeros((7, 7)), gamma).norm() == 0.0


@seeds
@given(st.sampled_from(SEEDS))
def test_theta_on_euclidean_metric_is_minus_twice_symmetric_part(seed):
    a = np.random.default_rng(seed).standard_normal((4, 4))
    a = a + a.T
    np.testing.assert_allclose(theta_action(a, euclidean(4)).components, -2 * a, atol=1e-14)


def test_theta_hermitian_triple_acts_on_all_parts():
    gamma = standard_hermitian(4)
    out = theta_action(np.eye(4), gamma)
    np.testing.assert_allclose(out.components[0], -2 * gamma.components[0])
    np.testing.assert_allclose(out.components[1], -2 * gamma.components[1])
    np.testing.assert_allclose(out.components[2], 0 * gamma.components[2], atol=1e-15)


@seeds
@given(st.sampled_from(SEEDS), st.sampled_from(KINDS))
def test_theta_is_representation(seed, kind):
    rng = np.random.default_rng(seed)
    gamma = random_tensor(kind, rng)
    n = gamma.p_dim
    a, b = rng.standard_normal((2, n, n))
    lhs = theta_action(a @ b - b @ a, gamma).components
    rhs = (theta_action(a, theta_action(b, gamma)) - theta_action(b, theta_action(a, gamma))).components
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * max(1.0, np.max(np.abs(rhs))))


# group action

def test_action_identity():
    gamma = standard_g2()
    np.testing.assert_array_equal(group_action(np.eye(7), gamma).components, gamma.components)


@pytest.mark.parametrize("c", [0.5, 2.0, -3.0])
def test_action_scalar_on_metric(c):
    out = group_action(c * np.eye(3), euclidean(3))
    np.testing.assert_allclose(out.components, c ** -2 * np.eye(3), atol=1e-15)


def test_action_rejects_singular():
    with pytest.raises(ValueError):
        group_action(np.zeros((3, 3)), euclidean(3))


@seeds
@given(st.sampled_from(SEEDS), st.sampled_from(KINDS))
def test_action_derivative_is_theta(seed, kind):
    rng = np.random.default_rng(seed)
    gamma = random_tensor(kind, rng)
    a = rng.standard_normal((gamma.p_dim, gamma.p_dim))
    eps = 1e-6
    fd = (group_action(expm(eps * a), gamma).components - gamma.components) / eps
    err = np.max(np.abs(fd - theta_action(a, gamma).components))
    assert err < 10 * eps * max(1.0, gamma.norm() * np.linalg.norm(a) ** 2)


@seeds
@given(st.sampled_from(SEEDS), st.sampled_from(KINDS))
def test_action_compatibility(seed, kind):
    # h . (theta(A) gamma) = theta(h A h^-1) (h . gamma) and (h1 h2) . gamma = h1 . (h2 . gamma)
    rng = np.random.default_rng(seed)
    gamma = random_tensor(kind, rng)
    n = gamma.p_dim
    h1 = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    h2 = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    a = rng.standard_normal((n, n))
    lhs = group_action(h1, theta_action(a, gamma)).components
    rhs = theta_action(h1 @ a @ np.linalg.inv(h1), group_action(h1, gamma)).components
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * max(1.0, np.max(np.abs(rhs))))
    two = group_action(h1, group_action(h2, gamma)).components
    one = group_action(h1 @ h2, gamma).components
    np.testing.assert_allclose(two, one, atol=1e-9 * max(1.0, np.max(np.abs(one))))


@seeds
@given(st.sampled_from(SEEDS))
def test_pullback_inverts_action(seed):
    rng = np.random.default_rng(seed)
    gamma = random_tensor("metric", rng)
    h = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
    np.testing.assert_allclose(pullback(h, group_action(h, gamma)).components, gamma.components, atol=1e-10)
    np.testing.assert_allclose(pullback(h, gamma).components, h.T @ gamma.components @ h, atol=1e-10)


# constructors

def test_metric_rejects_indefinite():
    with pytest.raises(DegenerateTensorError):
        metric(np.diag([1.0, -1.0]))


def test_metric_rejects_asymmetric():
    with pytest.raises(ValueError):
        metric(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_pseudo_metric_signature():
    assert pseudo_metric(np.diag([1.0, 1.0, -1.0])).signature == (2, 1)


def test_symplectic_rejects_odd():
    with pytest.raises(ValueError):
        symplectic(np.zeros((3, 3)))


def test_hermitian_triple_checks_compatibility():
    j = standard_complex_structure(4)
    with pytest.raises(ValueError):
        hermitian_triple(j.T, np.diag([1.0, 2.0, 1.0, 1.0]), j)


def test_three_form_rejects_symmetric():
    with pytest.raises(ValueError):
        three_form(np.ones((3, 3, 3)))


# stabilizers

@pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
def test_stabilizer_euclidean(n):
    dec = stabilizer_algebra(euclidean(n))
    assert dec.dims == (n * (n - 1) // 2, n * (n + 1) // 2)
    for s in dec.stab_basis:
        np.testing.assert_allclose(s, -s.T, atol=1e-12)


def test_stabilizer_symplectic():
    assert stabilizer_algebra(standard_symplectic(4)).dims == (10, 6)


def test_stabilizer_hermitian_is_u2():
    dec = stabilizer_algebra(standard_hermitian(4))
    assert dec.dims == (4, 12)
    j = standard_complex_structure(4)
    for s in dec.stab_basis:
        np.testing.assert_allclose(s, -s.T, atol=1e-12)
        np.testing.assert_allclose(s @ j, j @ s, atol=1e-12)


def test_stabilizer_g2():
    assert stabilizer_algebra(standard_g2()).dims == (14, 35)


def test_stabilizer_general_metric_dims():
    dec = stabilizer_algebra(metric(random_metric(4, np.random.default_rng(3))))
    assert dec.dims == (6, 10)


@seeds
@given(st.sampled_from(SEEDS))
def test_projection_for_euclidean_is_symmetrization(seed):
    a = np.random.default_rng(seed).standard_normal((5, 5))
    dec = stabilizer_algebra(euclidean(5))
    np.testing.assert_allclose(project_to_complement(a, dec), 0.5 * (a + a.T), atol=1e-12)
    np.testing.assert_allclose(project_to_stabilizer(a, dec), 0.5 * (a - a.T), atol=1e-12)


@seeds
@given(st.sampled_from(SEEDS), st.sampled_from(("metric", "symplectic")))
def test_projection_fixes_each_part(seed, kind):
    rng = np.random.default_rng(seed)
    gamma = random_tensor(kind, rng)
    dec = stabilizer_algebra(gamma)
    comp = np.tensordot(rng.standard_normal(len(dec.comp_basis)), np.array(dec.comp_basis), axes=1)
    stab = np.tensordot(rng.standard_normal(len(dec.stab_basis)), np.array(dec.stab_basis), axes=1)
    np.testing.assert_allclose(project_to_complement(comp, dec), comp, atol=1e-10)
    np.testing.assert_allclose(project_to_complement(stab, dec), 0, atol=1e-10)
    assert theta_action(stab, gamma).norm() < 1e-10


# operator from tensor

@pytest.mark.parametrize("kind", ("metric", "symplectic", "three_form"))
def test_operator_of_type_multiple_is_identity(kind):
    gamma = random_tensor(kind, np.random.default_rng(1))
    q = gamma * float(gamma.s - gamma.r)
    np.testing.assert_allclose(solve_operator_from_tensor(gamma, q), np.eye(gamma.p_dim), atol=1e-9)


def test_operator_of_zero():
    gamma = euclidean(3)
    np.testing.assert_array_equal(solve_operator_from_tensor(gamma, gamma * 0.0), np.zeros((3, 3)))


def test_operator_of_heisenberg_ricci():
    ric = koszul_oracle(heisenberg(), np.eye(3)).ricci_tensor
    q = euclidean(3).with_components(-2 * ric)
    np.testing.assert_allclose(solve_operator_from_tensor(euclidean(3), q), np.diag([-0.5, -0.5, 0.5]),
                               atol=1e-12)


def test_operator_incompatible_direction():
    # theta(gl(p)) g only reaches symmetric tensors
    q = euclidean(3).with_components(np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    with pytest.raises(IncompatibleDirectionError):
        solve_operator_from_tensor(euclidean(3), q)


@seeds
@given(st.sampled_from(SEEDS), st.sampled_from(("metric", "symplectic", "three_form")))
def test_operator_round_trip(seed, kind):
    rng = np.random.default_rng(seed)
    gamma = random_tensor(kind, rng)
    dec = stabilizer_algebra(gamma)
    q_op = project_to_complement(rng.standard_normal((gamma.p_dim, gamma.p_dim)), dec)
    back = solve_operator_from_tensor(gamma, theta_action(q_op, gamma), dec)
    np.testing.assert_allclose(back, q_op, atol=1e-8)


# homogeneous-space data

def test_adk_residual_trivial_isotropy():
    assert adk_invariance_residual(heisenberg(), ReductiveSplit(0, 3), euclidean(3)) == 0.0


def test_adk_residual_so3_semidirect():
    split = ReductiveSplit(3, 3)
    assert adk_invariance_residual(so3_semidirect_r3(), split, euclidean(3)) < 1e-14
    assert adk_invariance_residual(so3_semidirect_r3(), split, metric(np.diag([1.0, 1.0, 2.0]))) > 0.1


def test_exterior_differential_abelian():
    omega = standard_symplectic(4)
    assert exterior_differential(abelian(4), ReductiveSplit(0, 4), omega).norm() == 0.0


def test_exterior_differential_heisenberg_covector():
    e3 = InvariantTensor(np.array([0.0, 0.0, 1.0]), 1, 0)
    d = exterior_differential(heisenberg(), ReductiveSplit(0, 3), e3).components
    assert d[0, 1] == -1.0
    assert d[1, 0] == 1.0
    assert np.count_nonzero(d) == 2


def test_exterior_differential_rejects_symmetric():
    with pytest.raises(ValueError):
        exterior_differential(heisenberg(), ReductiveSplit(0, 3), euclidean(3))


@seeds
@given(st.sampled_from(SEEDS), st.integers(1, 2))
def test_d_squared_vanishes(seed, degree):
    rng = np.random.default_rng(seed)
    mu = unimodular(seed)
    split = ReductiveSplit(0, 3)
    t = rng.standard_normal((3,) * degree)
    if degree == 2:
        t = t - t.T
    form = InvariantTensor(t, degree, 0)
    dd = exterior_differential(mu, split, exterior_differential(mu, split, form))
    assert dd.norm() < 1e-10 * max(1.0, mu.norm() ** 2 * np.linalg.norm(t))


def test_d_squared_vanishes_on_filiform_five():
    from bracketflow import BracketTensor

    mu = BracketTensor.from_entries(5, [(0, 1, 2, 1), (0, 2, 3, 1), (0, 3, 4, 1), (1, 2, 4, 1)])
    rng = np.random.default_rng(0)
    t = rng.standard_normal((5, 5))
    form = InvariantTensor(t - t.T, 2, 0)
    split = ReductiveSplit(0, 5)
    assert exterior_differential(mu, split, exterior_differential(mu, split, form)).norm() < 1e-12


def test_normalizer_identity():
    assert is_in_normalizer(np.eye(2), sphere2(), ReductiveSplit(1, 2))[0]


def test_normalizer_trivial_isotropy():
    h = np.random.default_rng(0).standard_normal((3, 3))
    assert is_in_normalizer(h, heisenberg(), ReductiveSplit(0, 3)) == (True, 0.0)


@pytest.mark.parametrize("angle", [0.3, 1.0, 2.5])
def test_normalizer_rotation_on_sphere(angle):
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    ok, res = is_in_normalizer(rot, sphere2(), ReductiveSplit(1, 2))
    assert ok and res < 1e-12


def test_normalizer_rejects_shear():
    ok, res = is_in_normalizer(np.array([[1.0, 1.0], [0.0, 1.0]]), sphere2(), ReductiveSplit(1, 2))
    assert not ok and res > 0.1
