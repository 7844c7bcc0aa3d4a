"""Self-check suite behind ``psman verify``.

Each check returns ``(passed, detail)``; :func:`run_checks` runs them all
and collects the results without stopping at the first failure.
"""
import tempfile
import traceback
from pathlib import Path

import numpy as np

from psman import kernels
from psman.cdt import CdtModel, CdtObjective, cdt_loss, classify_gaussian_nb, fit_cdt
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
    tangent_defect,
)
from psman.mdpca import MdpcaModel, fit_mdpca, mdpca_loss, mdpca_objective, mdpca_spec, pca_baseline
from psman.optim import OptimizerConfig, finite_difference_grad, relative_error
from psman.oracles import loglog_slope, project_tangent_lstsq
from psman.synthetic import planted_mdpca, planted_transfer

PROJECTION_SPECS = [(3,), (1, 1, 1), (2, 1), (1, 2, 1)]


def _specs_for(sizes):
    for n in sizes:
        for parts in PROJECTION_SPECS:
            if sum(parts) <= n:
                yield PartitionSpec(n, parts)


def check_projection(seed, sizes, trials=10):
    rng = np.random.default_rng(seed)
    worst_oracle = worst_idem = worst_struct = 0.0
    for spec in _specs_for(sizes):
        for _ in range(trials):
            p = random_point(spec, int(rng.integers(2**31)))
            z = rng.standard_normal((spec.n, spec.n))
            d = project_tangent(p, z)
            worst_oracle = max(worst_oracle, float(np.linalg.norm(d.delta - project_tangent_lstsq(spec, p.q, z))))
            worst_idem = max(worst_idem, float(np.linalg.norm(project_tangent(p, d.delta).delta - d.delta)))
            worst_struct = max(worst_struct, tangent_defect(p, d.delta))
    ok = worst_oracle < 1e-8 and worst_idem < 1e-10 and worst_struct < 1e-10
    return ok, f"oracle {worst_oracle:.1e}, idempotency {worst_idem:.1e}, structure {worst_struct:.1e}"


def check_retraction(seed, sizes, steps=1000):
    n = max(sizes)
    spec = PartitionSpec(n, (1, n - 2) if n > 2 else (1,))
    rng = np.random.default_rng(seed)
    p = random_point(spec, seed)
    worst = 0.0
    for _ in range(steps):
        d = project_tangent(p, rng.standard_normal((n, n)))
        p = retract_qr(p, d, 0.1)
        worst = max(worst, orthonormality_defect(p.q))
    return worst < 1e-10, f"max defect over {steps} steps {worst:.1e}"


def check_exp_order(seed, sizes):
    n = max(sizes)
    spec = PartitionSpec(n, (1, 1))
    rng = np.random.default_rng(seed)
    p = random_point(spec, seed)
    d = project_tangent(p, rng.standard_normal((n, n)))
    alphas = [1e-2, 1e-3]
    errs = [float(np.linalg.norm(exp_map(p, d, a).q - retract_qr(p, d, a).q)) for a in alphas]
    slope = loglog_slope(alphas, errs)
    return abs(slope - 2.0) <= 0.3, f"log-log slope {slope:.3f}"


def _random_mdpca(rng, n, n_datasets):
    data = [rng.standard_normal((int(rng.integers(5, 30)), n)) for _ in range(n_datasets)]
    k_pd = int(rng.integers(1, (n - 1) // n_datasets + 1))
    k_sh = int(rng.integers(1, n - n_datasets * k_pd + 1))
    return data, mdpca_spec(n, n_datasets, k_pd, k_sh)


def check_mdpca_gradient(seed, instances=20):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        n = int(rng.integers(6, 13))
        data, spec = _random_mdpca(rng, n, 1 + i % 3)
        problem = mdpca_objective(data, spec).problem()
        p = random_point(spec, int(rng.integers(2**31)))
        analytic = problem.euclidean_grad(p.q[:, : spec.k])
        numeric = finite_difference_grad(problem, p)
        worst = max(worst, relative_error(analytic, numeric))
        projected = relative_error(lift_euclidean_gradient(p, analytic).delta,
                                   lift_euclidean_gradient(p, numeric).delta,
                                   scale=np.linalg.norm(analytic))
        worst = max(worst, projected)
    return worst < 1e-5, f"max relative error {worst:.1e}"


def _random_cdt(rng, n, n_classes):
    ys = np.concatenate([np.arange(1, n_classes + 1), rng.integers(1, n_classes + 1, 20)])
    source = LabeledDataset(rng.standard_normal((ys.size, n)), ys)
    target = rng.standard_normal((int(rng.integers(5, 25)), n))
    k_pc = int(rng.integers(1, n // n_classes + 1))
    return source, target, PartitionSpec(n, (k_pc,) * n_classes)


def check_cdt_gradient(seed, instances=21):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        n = int(rng.integers(6, 13))
        lam = (0.0, 0.5, 2.0)[i % 3]
        source, target, spec = _random_cdt(rng, n, 2 + i % 2)
        problem = CdtObjective(source, target, spec, lam).problem()
        p = random_point(spec, int(rng.integers(2**31)))
        analytic = problem.euclidean_grad(p.q[:, : spec.k])
        numeric = finite_difference_grad(problem, p)
        worst = max(worst, relative_error(analytic, numeric))
    return worst < 1e-5, f"max relative error {worst:.1e}"


def check_pca(seed):
    rng = np.random.default_rng(seed)
    basis = random_orthogonal(10, seed)
    x = rng.standard_normal((400, 10)) * np.sqrt(np.linspace(5.0, 0.1, 10)) @ basis.T
    model, report = fit_mdpca([x], None, 3, OptimizerConfig(alpha=0.1), seed=seed)
    angle = float(principal_angles(model.shared(), pca_baseline(x, 3)).max())
    return angle < 1e-6 and report.converged, f"max angle {angle:.1e}, {report.termination.value}"


def check_planted_mdpca(seed):
    inst = planted_mdpca(seed)
    model, report = fit_mdpca(inst.datasets, 1, 1, OptimizerConfig(alpha=0.1), seed=seed)
    angles = [float(principal_angles(model.shared(), inst.shared).max())]
    angles += [float(principal_angles(model.per_dataset(i), inst.unique[i]).max()) for i in range(2)]
    return max(angles) < 0.1 and report.converged, f"max angle {max(angles):.2e}"


def check_planted_cdt(seed):
    inst = planted_transfer(seed)
    model, report = fit_cdt(inst.source, inst.target, 2, 2.0, OptimizerConfig(alpha=0.1), seed=seed)
    angle = max(float(principal_angles(model.class_cols(c + 1), inst.class_bases[c]).max()) for c in range(2))
    _, acc_cdt = classify_gaussian_nb(model, inst.source, inst.target, inst.target_labels)
    _, acc_raw = classify_gaussian_nb(None, inst.source, inst.target, inst.target_labels)
    ok = angle < 0.15 and acc_cdt > acc_raw and report.converged
    return ok, f"max angle {angle:.3f}, NB accuracy {acc_cdt:.3f} projected vs {acc_raw:.3f} raw"


def check_invariance(seed, models=20):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(models):
        n = int(rng.integers(6, 11))
        data, spec = _random_mdpca(rng, n, 1 + i % 3)
        model = MdpcaModel(random_point(spec, int(rng.integers(2**31))), [f"X{j}" for j in range(len(data))])
        rotated = MdpcaModel(block_rotate(model.point, seed=int(rng.integers(2**31))), model.names)
        worst = max(worst, abs(mdpca_loss(model, data) - mdpca_loss(rotated, data)))
        source, target, cspec = _random_cdt(rng, n, 2)
        cmodel = CdtModel(random_point(cspec, int(rng.integers(2**31))), 2.0)
        crot = CdtModel(block_rotate(cmodel.point, seed=int(rng.integers(2**31))), 2.0)
        worst = max(worst, abs(cdt_loss(cmodel, source, target) - cdt_loss(crot, source, target)))
    return worst < 1e-10, f"max loss change {worst:.1e}"


def check_checkpoint(seed):
    p = random_point(PartitionSpec(7, (2, 3)), seed)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "point.psman"
        write_checkpoint(p, path)
        back = read_checkpoint(path)
    exact = np.array_equal(back.q, p.q) and back.spec == p.spec
    dist = subspace_distance(p, back)
    return exact and dist == 0.0, f"entrywise equal {exact}, distance {dist:.1e}"


def check_backends(seed, sizes):
    if len(kernels.available_backends()) < 2:
        return True, "compiled kernels not built; fallback only"
    rng = np.random.default_rng(seed)
    fast, slow = kernels.get_backend("cython"), kernels.get_backend("python")
    worst = 0.0
    for spec in _specs_for(sizes):
        q = random_orthogonal(spec.n, int(rng.integers(2**31)))
        z = rng.standard_normal((spec.n, spec.n))
        off = spec.block_offsets
        worst = max(worst, float(np.abs(fast.project_tangent(q, z, off) - slow.project_tangent(q, z, off)).max()))
        qa, ra = fast.householder_qr(z)
        qb, rb = slow.householder_qr(z)
        worst = max(worst, float(np.abs(qa - qb).max()), float(np.abs(ra - rb).max()) / max(1.0, float(np.abs(rb).max())))
    return worst < 1e-10, f"max backend difference {worst:.1e}"


def run_checks(seed=0, sizes=(4, 5, 6)):
    sizes = tuple(int(s) for s in sizes)
    checks = [
        ("projection oracle", lambda: check_projection(seed, sizes)),
        ("retraction orthonormality", lambda: check_retraction(seed, sizes)),
        ("exp map vs retraction order", lambda: check_exp_order(seed, sizes)),
        ("md-pca gradient", lambda: check_mdpca_gradient(seed)),
        ("cdt gradient", lambda: check_cdt_gradient(seed)),
        ("pca equivalence", lambda: check_pca(seed)),
        ("planted md-pca recovery", lambda: check_planted_mdpca(seed)),
        ("planted cdt recovery", lambda: check_planted_cdt(seed)),
        ("loss block-rotation invariance", lambda: check_invariance(seed)),
        ("checkpoint round trip", lambda: check_checkpoint(seed)),
        ("kernel backends agree", lambda: check_backends(seed, sizes)),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001
            ok, detail = False, f"{type(exc).__name__}: {exc}"
            traceback.print_exc()
        results.append((name, bool(ok), detail))
    return results
