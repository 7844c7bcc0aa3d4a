"""Exit criteria for the package, one test group per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints
one PASS/FAIL line per criterion with the measured values.
"""
import numpy as np
import pytest

from psman import kernels
from psman.cdt import CdtModel, CdtObjective, cdt_loss, classify_gaussian_nb, fit_cdt
from psman.cli import run
from psman.data import LabeledDataset
from psman.io import read_checkpoint, write_checkpoint
from psman.linalg import orthonormality_defect, principal_angles, random_orthogonal
from psman.manifold import (
    PartitionSpec,
    block_rotate,
    exp_map,
    lift_euclidean_gradient,
    project_tangent,
    random_point,
    retract_qr,
    subspace_distance,
)
from psman.mdpca import MdpcaModel, fit_mdpca, mdpca_loss, mdpca_objective, mdpca_spec, pca_baseline, variance_explained
from psman.optim import OptimizerConfig, finite_difference_grad, relative_error
from psman.oracles import loglog_slope, project_tangent_lstsq
from psman.synthetic import planted_mdpca, planted_transfer

pytestmark = pytest.mark.acceptance

SEEDS = range(5)
CONFIG = OptimizerConfig(alpha=0.1, tol=1e-8, max_iters=5000, backtracking=True)


def criterion(number, title):
    return pytest.mark.criterion(number, title)


# ---------------------------------------------------------------- 1

@criterion(1, "tangent projection matches least-squares basis oracle; idempotent")
@pytest.mark.parametrize("name", kernels.available_backends())
def test_projection_oracle(name, record_property):
    rng = np.random.default_rng(1)
    worst_oracle = worst_idem = 0.0
    count = 0
    with kernels.use_backend(name):
        for n in (4, 5, 6):
            for sizes in ((3,), (1, 1, 1), (2, 1), (1, 2, 1)):
                spec = PartitionSpec(n, sizes)
                for _ in range(50):
                    p = random_point(spec, int(rng.integers(2**31)))
                    z = rng.standard_normal((n, n))
                    d = project_tangent(p, z).delta
                    worst_oracle = max(worst_oracle, np.linalg.norm(d - project_tangent_lstsq(spec, p.q, z)))
                    worst_idem = max(worst_idem, np.linalg.norm(project_tangent(p, d).delta - d))
                    count += 1
    record_property("detail", f"{name}: {count} inputs, oracle {worst_oracle:.1e}, idempotency {worst_idem:.1e}")
    assert worst_oracle < 1e-8
    assert worst_idem < 1e-10


# ---------------------------------------------------------------- 2

@criterion(2, "retraction keeps orthonormality; exp map vs retraction is O(alpha^2)")
def test_chained_retractions(record_property):
    rng = np.random.default_rng(2)
    spec = PartitionSpec(6, (2, 1, 2))
    p = random_point(spec, 2)
    worst = 0.0
    for _ in range(1000):
        p = retract_qr(p, project_tangent(p, rng.standard_normal((6, 6))), float(rng.uniform(0.01, 1.0)))
        worst = max(worst, orthonormality_defect(p.q))
    record_property("detail", f"defect after 1000 steps {worst:.1e}")
    assert worst < 1e-10


@criterion(2, "retraction keeps orthonormality; exp map vs retraction is O(alpha^2)")
@pytest.mark.parametrize("seed", range(3))
def test_exp_vs_retraction_order(seed, record_property):
    rng = np.random.default_rng(seed)
    spec = PartitionSpec(6, (2, 1, 2))
    p = random_point(spec, seed)
    d = project_tangent(p, rng.standard_normal((6, 6)))
    alphas = [1e-2, 1e-3]
    errs = [np.linalg.norm(exp_map(p, d, a).q - retract_qr(p, d, a).q) for a in alphas]
    slope = loglog_slope(alphas, errs)
    record_property("detail", f"slope {slope:.3f}")
    assert abs(slope - 2.0) <= 0.3


# ---------------------------------------------------------------- 3

def _mdpca_instance(rng, i):
    n = int(rng.integers(4, 13))
    n_datasets = 1 + i % 3
    k_pd = int(rng.integers(1, (n - 1) // n_datasets + 1))
    k_sh = int(rng.integers(1, n - n_datasets * k_pd + 1))
    data = [rng.standard_normal((int(rng.integers(3, 25)), n)) for _ in range(n_datasets)]
    return data, mdpca_spec(n, n_datasets, k_pd, k_sh)


@criterion(3, "analytic gradients match central finite differences")
def test_mdpca_gradients(record_property):
    rng = np.random.default_rng(3)
    worst = worst_proj = 0.0
    for i in range(24):
        data, spec = _mdpca_instance(rng, i)
        problem = mdpca_objective(data, spec).problem()
        p = random_point(spec, int(rng.integers(2**31)))
        analytic = problem.euclidean_grad(p.q[:, : spec.k])
        fd = finite_difference_grad(problem, p)
        worst = max(worst, relative_error(analytic, fd))
        # scaled by the ambient norm: when k = n with one dataset the loss is
        # constant on the manifold and both projections vanish
        worst_proj = max(worst_proj, relative_error(lift_euclidean_gradient(p, analytic).delta,
                                                    lift_euclidean_gradient(p, fd).delta,
                                                    scale=np.linalg.norm(analytic)))
    record_property("detail", f"md-pca 24 instances: ambient {worst:.1e}, projected {worst_proj:.1e}")
    assert worst < 1e-5 and worst_proj < 1e-5


@criterion(3, "analytic gradients match central finite differences")
def test_cdt_gradients(record_property):
    rng = np.random.default_rng(4)
    worst = 0.0
    for i in range(24):
        n_classes = 2 + i % 2
        lam = (0.0, 0.5, 2.0)[(i // 2) % 3]
        n = int(rng.integers(2 * n_classes, 13))
        y = np.concatenate([np.arange(1, n_classes + 1), rng.integers(1, n_classes + 1, 15)])
        source = LabeledDataset(rng.standard_normal((y.size, n)), y)
        target = rng.standard_normal((int(rng.integers(3, 20)), n))
        k_pc = int(rng.integers(1, n // n_classes + 1))
        spec = PartitionSpec(n, (k_pc,) * n_classes)
        problem = CdtObjective(source, target, spec, lam).problem()
        p = random_point(spec, int(rng.integers(2**31)))
        analytic = problem.euclidean_grad(p.q[:, : spec.k])
        worst = max(worst, relative_error(analytic, finite_difference_grad(problem, p)))
    record_property("detail", f"cdt 24 instances: {worst:.1e}")
    assert worst < 1e-5


# ---------------------------------------------------------------- fits shared by 4-9

@pytest.fixture(scope="module")
def pca_fits():
    out = []
    for seed in SEEDS:
        rng = np.random.default_rng(100 + seed)
        basis = random_orthogonal(10, seed)
        x = rng.standard_normal((400, 10)) * np.sqrt(np.linspace(5.0, 0.1, 10)) @ basis.T
        model, report = fit_mdpca([x], None, 3, CONFIG, seed=seed)
        out.append((x, model, report))
    return out


@pytest.fixture(scope="module")
def planted_mdpca_fits():
    out = []
    for seed in SEEDS:
        inst = planted_mdpca(seed, n=8, n_datasets=2, n_shared=1, n_unique=1, noise=0.01)
        model, report = fit_mdpca(inst.datasets, 1, 1, CONFIG, seed=seed)
        out.append((inst, model, report))
    return out


SWEEP_SEEDS = range(3)
SWEEP_GRID = (1, 2, 3)
K_TOTAL, S_STAR = 10, 4


@pytest.fixture(scope="module")
def sweep_fits():
    out = {}
    for seed in SWEEP_SEEDS:
        inst = planted_mdpca(seed, n=20, n_datasets=3, n_shared=S_STAR, n_unique=2, n_samples=300,
                             noise=0.0, shared_scales=[3.0, 2.5, 2.0, 1.5], unique_scale=2.0)
        for k_pd in SWEEP_GRID:
            model, report = fit_mdpca(inst.datasets, k_pd, K_TOTAL - 3 * k_pd, CONFIG, seed=seed)
            out[seed, k_pd] = (inst, model, report)
    return out


@pytest.fixture(scope="module")
def cdt_fits():
    out = []
    for seed in SEEDS:
        inst = planted_transfer(seed)
        model, report = fit_cdt(inst.source, inst.target, 2, 2.0, CONFIG, seed=seed)
        out.append((inst, model, report))
    return out


# ---------------------------------------------------------------- 4

@criterion(4, "single dataset, one partition: fit equals top-k PCA subspace")
def test_pca_degeneration(pca_fits, record_property):
    angles = [float(principal_angles(model.shared(), pca_baseline(x, 3)).max()) for x, model, _ in pca_fits]
    record_property("detail", f"max angle over 5 seeds {max(angles):.1e}")
    assert max(angles) < 1e-6


# ---------------------------------------------------------------- 5

@criterion(5, "planted two-dataset instance: shared and per-dataset directions recovered")
def test_planted_mdpca(planted_mdpca_fits, record_property):
    worst = []
    for inst, model, _ in planted_mdpca_fits:
        angles = [principal_angles(model.shared(), inst.shared).max()]
        angles += [principal_angles(model.per_dataset(i), inst.unique[i]).max() for i in range(2)]
        worst.append(float(max(angles)))
    good = sum(a < 0.1 for a in worst)
    record_property("detail", f"{good}/5 seeds below 0.1 rad, worst angles {', '.join(f'{a:.1e}' for a in worst)}")
    assert good >= 4


# ---------------------------------------------------------------- 6

def _own_plus_shared(model, inst):
    rows = variance_explained(model, inst.datasets)
    totals = {}
    for dataset, part, frac in rows:
        if part in (dataset, "shared"):
            totals[dataset] = totals.get(dataset, 0.0) + frac
    return np.array([totals[d.name] for d in inst.datasets])


@criterion(6, "per-dataset variance insensitive to k_pd while k_sh >= s*, lower once k_sh < s*")
def test_sweep_trend(sweep_fits, record_property):
    flat_ok = drop_ok = True
    details = []
    for seed in SWEEP_SEEDS:
        totals = {k: _own_plus_shared(sweep_fits[seed, k][1], sweep_fits[seed, k][0]) for k in SWEEP_GRID}
        enough = [k for k in SWEEP_GRID if K_TOTAL - 3 * k >= S_STAR]
        short = [k for k in SWEEP_GRID if K_TOTAL - 3 * k < S_STAR]
        stacked = np.array([totals[k] for k in enough])
        spread = float(np.max((stacked.max(axis=0) - stacked.min(axis=0)) / stacked.max(axis=0)))
        floor = stacked.min(axis=0)
        drop = all(np.all(totals[k] < floor) for k in short)
        flat_ok &= spread < 0.05
        drop_ok &= drop
        details.append(f"seed {seed}: spread {spread:.1e}, short-k_sh totals "
                       + "/".join(f"{v:.2f}" for k in short for v in totals[k]))
    record_property("detail", "; ".join(details))
    assert flat_ok and drop_ok


# ---------------------------------------------------------------- 7

@criterion(7, "losses invariant under block rotations")
def test_loss_invariance(record_property):
    rng = np.random.default_rng(7)
    worst_md = worst_cdt = 0.0
    for i in range(20):
        data, spec = _mdpca_instance(rng, i)
        model = MdpcaModel(random_point(spec, int(rng.integers(2**31))), [f"X{j}" for j in range(len(data))])
        rotated = MdpcaModel(block_rotate(model.point, seed=int(rng.integers(2**31))), model.names)
        worst_md = max(worst_md, abs(mdpca_loss(model, data) - mdpca_loss(rotated, data)))

        n_classes = 2 + i % 2
        n = int(rng.integers(2 * n_classes, 12))
        y = np.concatenate([np.arange(1, n_classes + 1), rng.integers(1, n_classes + 1, 10)])
        source = LabeledDataset(rng.standard_normal((y.size, n)), y)
        target = rng.standard_normal((8, n))
        cspec = PartitionSpec(n, (int(rng.integers(1, n // n_classes + 1)),) * n_classes)
        cmodel = CdtModel(random_point(cspec, int(rng.integers(2**31))), 2.0)
        crot = CdtModel(block_rotate(cmodel.point, seed=int(rng.integers(2**31))), 2.0)
        worst_cdt = max(worst_cdt, abs(cdt_loss(cmodel, source, target) - cdt_loss(crot, source, target)))
    record_property("detail", f"md-pca {worst_md:.1e}, cdt {worst_cdt:.1e}")
    assert worst_md < 1e-10 and worst_cdt < 1e-10


# ---------------------------------------------------------------- 8

@criterion(8, "planted transfer: class subspaces recovered and projected NB beats raw NB")
def test_planted_cdt(cdt_fits, record_property):
    good = 0
    details = []
    for inst, model, _ in cdt_fits:
        angle = max(float(principal_angles(model.class_cols(c + 1), inst.class_bases[c]).max()) for c in range(2))
        _, acc = classify_gaussian_nb(model, inst.source, inst.target, inst.target_labels)
        _, raw = classify_gaussian_nb(None, inst.source, inst.target, inst.target_labels)
        good += angle < 0.15 and acc > raw
        details.append(f"{angle:.3f} rad {acc:.2f}>{raw:.2f}")
    record_property("detail", f"{good}/5 seeds: " + ", ".join(details))
    assert good >= 4


# ---------------------------------------------------------------- 9

@criterion(9, "every fit has a non-increasing loss trace and terminates Converged")
def test_monotone_and_converged(pca_fits, planted_mdpca_fits, sweep_fits, cdt_fits, record_property):
    reports = [r for *_, r in pca_fits] + [r for *_, r in planted_mdpca_fits]
    reports += [r for *_, r in sweep_fits.values()] + [r for *_, r in cdt_fits]
    monotone = all(np.all(np.diff(r.loss_trace) <= 0) for r in reports)
    converged = all(r.converged for r in reports)
    iters = [r.iterations for r in reports]
    record_property("detail", f"{len(reports)} fits, iterations {min(iters)}-{max(iters)}")
    assert monotone and converged
    assert max(iters) <= 5000


# ---------------------------------------------------------------- 10

@criterion(10, "CLI verify passes, repeated runs byte-identical, checkpoint round trip exact")
def test_cli_verify(capsys):
    assert run(["verify"]) == 0
    assert "FAIL" not in capsys.readouterr().out


@criterion(10, "CLI verify passes, repeated runs byte-identical, checkpoint round trip exact")
def test_cli_reproducible(tmp_path):
    inst = planted_mdpca(0)
    paths = []
    for d in inst.datasets:
        path = tmp_path / f"{d.name}.csv"
        np.savetxt(path, d.x, delimiter=",", fmt="%.17g")
        paths.append(str(path))
    argv = ["mdpca", *paths, "--k-pd", "1", "--k-sh", "1", "--seed", "11"]
    assert run(argv + ["--out", str(tmp_path / "a")]) == 0
    assert run(argv + ["--out", str(tmp_path / "b")]) == 0
    for name in ("variance_explained.csv", "loss_trace.csv", "point.psman"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@criterion(10, "CLI verify passes, repeated runs byte-identical, checkpoint round trip exact")
def test_checkpoint_round_trip(tmp_path):
    for seed, sizes in enumerate([(1,), (2, 3), (1, 1, 1), (4, 3)]):
        p = random_point(PartitionSpec(7, sizes), seed)
        path = tmp_path / f"p{seed}.psman"
        write_checkpoint(p, path)
        back = read_checkpoint(path)
        assert np.array_equal(back.q, p.q)
        assert subspace_distance(p, back) == 0.0
