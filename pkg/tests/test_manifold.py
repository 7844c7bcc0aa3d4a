import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psman.errors import ConfigError, NotOrthonormal, ShapeMismatch, SpecMismatch
from psman.linalg import orthonormality_defect, random_orthogonal
from psman.manifold import (
    PartitionSpec,
    PSPoint,
    TangentVector,
    block_rotate,
    exp_map,
    lift_euclidean_gradient,
    partition_cols,
    perp_cols,
    project_tangent,
    random_point,
    representative,
    retract_qr,
    subspace_distance,
    tangent_defect,
)
from psman.oracles import project_tangent_lstsq, tangent_basis, tangent_dimension

pytestmark = pytest.mark.usefixtures("backend")


@st.composite
def specs(draw, max_n=7):
    n = draw(st.integers(2, max_n))
    sizes = []
    left = n
    for _ in range(draw(st.integers(1, 3))):
        if left < 1:
            break
        s = draw(st.integers(1, left))
        sizes.append(s)
        left -= s
    return PartitionSpec(n, tuple(sizes))


def test_spec_properties():
    spec = PartitionSpec(6, (1, 2))
    assert (spec.m, spec.k, spec.remainder) == (2, 3, 3)
    assert spec.partition_range(1) == (1, 3)
    assert spec.perp_range == (3, 6)
    assert list(spec.block_offsets) == [0, 1, 3, 6]
    assert list(spec.partition_offsets) == [0, 1, 3]
    full = PartitionSpec(3, (1, 2))
    assert list(full.block_offsets) == [0, 1, 3]


@pytest.mark.parametrize("sizes", [(), (0, 1), (3, 2)])
def test_spec_rejects(sizes):
    with pytest.raises(ConfigError):
        PartitionSpec(4, sizes)


def test_point_validation():
    spec = PartitionSpec(3, (1,))
    with pytest.raises(ShapeMismatch):
        PSPoint(spec, np.eye(2))
    with pytest.raises(NotOrthonormal):
        PSPoint(spec, 2 * np.eye(3))
    nearly = np.eye(3) + 1e-8 * np.arange(9.0).reshape(3, 3)
    p = PSPoint(spec, nearly)
    assert orthonormality_defect(p.q) < 1e-14
    assert not p.q.flags.writeable


def test_projection_zero_and_self(rng):
    p = random_point(PartitionSpec(5, (2, 1)), 1)
    np.testing.assert_array_equal(project_tangent(p, np.zeros((5, 5))).delta, 0.0)
    np.testing.assert_allclose(project_tangent(p, p.q).delta, 0.0, atol=1e-14)


def test_projection_matches_basis_oracle(rng):
    spec = PartitionSpec(4, (1, 2))
    for seed in range(5):
        p = random_point(spec, seed)
        z = rng.standard_normal((4, 4))
        np.testing.assert_allclose(project_tangent(p, z).delta, project_tangent_lstsq(spec, p.q, z), atol=1e-8)


def test_tangent_basis_dimension():
    spec = PartitionSpec(6, (1, 2))
    basis = tangent_basis(spec, random_orthogonal(6, 0))
    assert basis.shape[0] == tangent_dimension(spec) == 1 * 2 + 1 * 3 + 2 * 3
    gram = np.einsum("aij,bij->ab", basis, basis)
    np.testing.assert_allclose(gram, np.eye(basis.shape[0]), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(specs(), st.integers(0, 2**31 - 1))
def test_projection_properties(spec, seed):
    rng = np.random.default_rng(seed)
    p = random_point(spec, seed)
    z = rng.standard_normal((spec.n, spec.n))
    d = project_tangent(p, z).delta
    assert tangent_defect(p, d) < 1e-10
    np.testing.assert_allclose(project_tangent(p, d).delta, d, atol=1e-10)
    # the residual is orthogonal to the tangent space
    residual = z - d
    for b in tangent_basis(spec, p.q):
        assert abs(np.sum(b * residual)) < 1e-10


def test_tangent_vector_rejects_non_tangent():
    p = random_point(PartitionSpec(3, (1,)), 0)
    with pytest.raises(ShapeMismatch):
        TangentVector(p, p.q)


def test_lift_gradient(rng):
    p = random_point(PartitionSpec(5, (1, 2)), 3)
    np.testing.assert_array_equal(lift_euclidean_gradient(p, np.zeros((5, 3))).delta, 0.0)
    g = rng.standard_normal((5, 3))
    padded = np.hstack([g, np.zeros((5, 2))])
    np.testing.assert_allclose(lift_euclidean_gradient(p, g).delta, project_tangent(p, padded).delta)
    full = random_point(PartitionSpec(4, (1, 3)), 3)
    g = rng.standard_normal((4, 4))
    np.testing.assert_array_equal(lift_euclidean_gradient(full, g).delta, project_tangent(full, g).delta)
    with pytest.raises(ShapeMismatch):
        lift_euclidean_gradient(p, np.zeros((5, 4)))


def test_retraction_examples(rng):
    p = random_point(PartitionSpec(4, (2,)), 0)
    d = project_tangent(p, rng.standard_normal((4, 4)))
    np.testing.assert_allclose(retract_qr(p, d, 0.0).q, p.q, atol=1e-14)

    p2 = PSPoint(PartitionSpec(2, (1,)), np.eye(2))
    d2 = TangentVector(p2, np.array([[0.0, -1.0], [1.0, 0.0]]))
    c = np.sqrt(0.5)
    np.testing.assert_allclose(retract_qr(p2, d2, 1.0).q, [[c, c], [-c, c]], atol=1e-15)


def test_retraction_rejects_foreign_tangent(rng):
    spec = PartitionSpec(3, (1,))
    p, r = random_point(spec, 0), random_point(spec, 1)
    with pytest.raises(SpecMismatch):
        retract_qr(p, project_tangent(r, rng.standard_normal((3, 3))), 0.1)
    with pytest.raises(ConfigError):
        retract_qr(p, project_tangent(p, np.zeros((3, 3))), -1.0)


def test_exp_map_planar():
    # steps against delta, like the retraction: rotation by -alpha * theta
    theta, alpha = 0.7, 0.5
    p = PSPoint(PartitionSpec(2, (1,)), np.eye(2))
    d = TangentVector(p, np.array([[0.0, -theta], [theta, 0.0]]))
    phi = -alpha * theta
    rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
    np.testing.assert_allclose(exp_map(p, d, alpha).q, rot, atol=1e-14)
    np.testing.assert_array_equal(exp_map(p, d, 0.0).q, p.q)


def test_exp_map_agrees_with_retraction_to_first_order(rng):
    p = random_point(PartitionSpec(5, (2, 1)), 9)
    d = project_tangent(p, rng.standard_normal((5, 5)))
    errs = [np.linalg.norm(exp_map(p, d, a).q - retract_qr(p, d, a).q) for a in (1e-2, 1e-3)]
    assert 100 / 3 < errs[0] / errs[1] < 100 * 3


def test_block_rotate_examples():
    spec = PartitionSpec(4, (1, 2))
    p = random_point(spec, 4)
    same = block_rotate(p, [np.eye(1), np.eye(2), np.eye(1)])
    np.testing.assert_array_equal(same.q, p.q)
    g = random_point(PartitionSpec(3, (3,)), 0)
    rotated = block_rotate(g, [random_orthogonal(3, 1)])
    assert subspace_distance(g, rotated) < 1e-14
    for seed in range(5):
        assert subspace_distance(p, block_rotate(p, seed=seed)) < 1e-10
    with pytest.raises(ShapeMismatch):
        block_rotate(p, [np.eye(1)])
    with pytest.raises(NotOrthonormal):
        block_rotate(p, [np.eye(1), 2 * np.eye(2), np.eye(1)])


def test_subspace_distance_examples():
    spec = PartitionSpec(2, (1,))
    p = PSPoint(spec, np.eye(2))
    c = np.sqrt(0.5)
    r = PSPoint(spec, np.array([[c, -c], [c, c]]))
    assert subspace_distance(p, p) == 0.0
    assert abs(subspace_distance(p, r) - 1.0) < 1e-15
    with pytest.raises(SpecMismatch):
        subspace_distance(p, PSPoint(PartitionSpec(2, (2,)), np.eye(2)))


def test_subspace_distance_sees_partition_swaps():
    # same overall span, different assignment of directions to partitions
    spec = PartitionSpec(3, (1, 1))
    p = PSPoint(spec, np.eye(3))
    swapped = PSPoint(spec, np.eye(3)[:, [1, 0, 2]])
    assert abs(subspace_distance(p, swapped) - np.sqrt(2.0)) < 1e-15


def test_representative_and_columns():
    spec = PartitionSpec(5, (2, 1))
    p = random_point(spec, 2)
    np.testing.assert_array_equal(representative(p), p.q[:, :3])
    np.testing.assert_array_equal(partition_cols(p, 1), p.q[:, 2:3])
    np.testing.assert_array_equal(perp_cols(p), p.q[:, 3:])
    np.testing.assert_array_equal(representative(random_point(PartitionSpec(3, (3,)), 0)).shape, (3, 3))
    assert orthonormality_defect(representative(p)) < 1e-12


def test_random_point_deterministic():
    spec = PartitionSpec(4, (1, 1))
    np.testing.assert_array_equal(random_point(spec, 5).q, random_point(spec, 5).q)
