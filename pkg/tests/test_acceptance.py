"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.
"""
import json
import math
import time

import numpy as np
import pytest

import lpcoreset as lc
from conftest import circle_directions
from lpcoreset.cli import run_cli
from lpcoreset.io import generate_instance, json_dumps
from lpcoreset.kernels import row_pnorms
from lpcoreset.linalg import dual_exponent
from lpcoreset.sampling import r1_default, r2_default
from lpcoreset.solver import solve_lp_regression

CERT_SLACK = 1.0 + 1e-8


def gate(number, name, ok, detail, elapsed, budget_s):
    status = "PASS" if ok and elapsed < budget_s else "FAIL"
    print(
        f"ACCEPTANCE {number} [{status}] {name}: {detail} "
        f"({elapsed:.1f}s / budget {budget_s:.0f}s)"
    )
    assert ok, f"criterion {number} failed: {detail}"
    assert elapsed < budget_s, f"criterion {number} exceeded budget"


def scaled_config(p, d, eps, stage1_target, stage2_target):
    """Config whose formula sizes hit the requested expected sample sizes."""
    unit = lc.SamplerConfig(p=p, d=d, epsilon=eps)
    return lc.SamplerConfig(
        p=p,
        d=d,
        epsilon=eps,
        r1_scale=stage1_target / r1_default(unit),
        r2_scale=stage2_target / r2_default(unit, strict=False),
    )


def test_criterion_1_basis_certificates():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    dims = [1, 2, 3, 5]
    exponents = [1.0, 1.5, 2.0, 3.0, 4.0]
    failures = []
    for trial in range(50):
        n = int(rng.integers(50, 501))
        d = dims[trial % len(dims)]
        p = exponents[trial % len(exponents)]
        A = rng.standard_normal((n, d))
        W = lc.well_conditioned_basis(A, p, tol=0.05)
        alpha_m, beta_m = lc.certify_basis(W, n_probes=1500, seed=trial)
        if alpha_m > W.alpha_cert * CERT_SLACK:
            failures.append((trial, "alpha", alpha_m, W.alpha_cert))
        if beta_m > W.beta_cert * CERT_SLACK:
            failures.append((trial, "beta", beta_m, W.beta_cert))
        if p == 2.0:
            if abs(W.alpha_cert - math.sqrt(d)) > 1e-8 or abs(W.beta_cert - 1.0) > 1e-8:
                failures.append((trial, "p2-exact", W.alpha_cert, W.beta_cert))
        if d == 1:
            q = dual_exponent(p)
            for z in (np.array([1.0]), np.array([-1.0])):
                lhs = lc.vec_p_norm(z, q) if not math.isinf(q) else 1.0
                if lhs > W.beta_cert * lc.vec_p_norm(W.U @ z, p) * CERT_SLACK:
                    failures.append((trial, "net-d1", lhs, W.beta_cert))
        elif d == 2:
            dirs = circle_directions(10_000)
            q = dual_exponent(p)
            num = np.max(np.abs(dirs), axis=1) if math.isinf(q) else row_pnorms(dirs, q)
            den = row_pnorms(dirs @ W.U.T, p)
            worst = float(np.max(num / den))
            if worst > W.beta_cert * CERT_SLACK:
                failures.append((trial, "net-d2", worst, W.beta_cert))
    elapsed = time.perf_counter() - t0
    gate(
        1,
        "well-conditioned basis certificates",
        not failures,
        f"50 instances, certificate violations: {failures[:3] or 'none'}",
        elapsed,
        120.0,
    )


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_criterion_2_subspace_preservation(p):
    # NOTE: the p = 1 leg is known to sit below the 95/100 target at an
    # expected sample of 400: the coefficient of variation of any
    # Bernoulli estimator of ||Ax||_1 at budget 400/2000 is >= 4.1%
    # (leverage sampling achieves 5.2%), so the max over 100 directions
    # crosses 1/8 in roughly 20% of seeds.  The check is kept faithful
    # and the failure documented rather than retuned.
    t0 = time.perf_counter()
    g = np.random.default_rng(202)
    A = g.standard_normal((2000, 4))
    W = lc.well_conditioned_basis(A, p)
    probs = lc.stage1_probabilities(W, 400.0)
    assert 300.0 <= probs.sum() <= 400.0 + 1e-9  # E[sample] ~ 400
    distortion_hits = 0
    rank_hits = 0
    for seed in range(100):
        plan = lc.realize_sample(probs, p, seed=lc.derive_seed(seed, f"c2:{p}"))
        if lc.numeric_rank(lc.apply_plan(plan, A)) == 4:
            rank_hits += 1
        dist = lc.measure_distortion(A, plan, p, x_samples=100, seed=seed)
        if dist <= 0.125:
            distortion_hits += 1
    ok = distortion_hits >= 95 and rank_hits >= 99
    elapsed = time.perf_counter() - t0
    gate(
        2,
        f"subspace-preserving sampling (p={p:g})",
        ok,
        f"distortion<=1/8 in {distortion_hits}/100 (need 95), "
        f"rank=4 in {rank_hits}/100 (need 99)",
        elapsed,
        300.0,
    )


@pytest.fixture(scope="module")
def reference_2000():
    inst = lc.reference_instance(n=2000, d=4, p=1.0, corruption_rho=0.1, seed=42)
    basis = lc.well_conditioned_basis(inst.A, 1.0)
    exact = solve_lp_regression(inst.A, inst.b, 1.0)
    return inst, basis, exact


def test_criterion_3_constant_factor(reference_2000):
    t0 = time.perf_counter()
    inst, basis, exact = reference_2000
    cfg = scaled_config(1.0, 4, 0.5, stage1_target=400.0, stage2_target=600.0)
    hits = 0
    for seed in range(100):
        out = lc.stage_one(inst, cfg, lc.derive_seed(seed, "c3"), basis=basis)
        if out.full_objective <= 8.0 * exact.objective:
            hits += 1
    elapsed = time.perf_counter() - t0
    gate(
        3,
        "constant-factor stage",
        hits >= 60,
        f"stage-1 objective <= 8Z in {hits}/100 seeds (bound: 60)",
        elapsed,
        600.0,
    )


def test_criterion_4_relative_error(reference_2000):
    t0 = time.perf_counter()
    inst, basis, exact = reference_2000
    cfg = scaled_config(1.0, 4, 0.5, stage1_target=400.0, stage2_target=600.0)
    ratios = []
    for seed in range(100):
        rep = lc.two_stage_solve(inst, cfg, seed=lc.derive_seed(seed, "c4"), basis=basis)
        assert rep.status == "ok"
        ratios.append(rep.final_objective / exact.objective)
    hits = int(np.sum(np.asarray(ratios) <= 1.5))
    elapsed = time.perf_counter() - t0
    gate(
        4,
        "relative-error stage (eps=0.5)",
        hits >= 50,
        f"final ratio <= 1.5 in {hits}/100 seeds (bound: 50), "
        f"median ratio {np.median(ratios):.5f}",
        elapsed,
        900.0,
    )


def test_criterion_5_guarantee_frequencies():
    t0 = time.perf_counter()
    details = {}
    ok = True
    for p in (1.0, 2.0):
        inst = lc.reference_instance(n=2000, d=4, p=p, corruption_rho=0.1, seed=42)
        cfg = scaled_config(p, 4, 0.5, stage1_target=400.0, stage2_target=600.0)
        stats = lc.guarantee_statistics(inst, cfg, n_seeds=100, master_seed=5)
        fa = stats["frequencies"]["a"]
        fe = stats["frequencies"]["e"]
        details[p] = (fa, fe)
        ok = ok and fa >= 1.0 - 1.0 / 3.0**p - 0.1 and fe >= 0.5
    elapsed = time.perf_counter() - t0
    gate(
        5,
        "stagewise guarantee frequencies",
        ok,
        f"(freq_a, freq_e) per p over 100 seeds: {details} "
        f"(bounds: a >= 1-3^-p-0.1, e >= 0.5)",
        elapsed,
        900.0,
    )


def test_criterion_6_solver_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    worst_p2 = 0.0
    for _ in range(100):
        n = int(rng.integers(10, 120))
        m = int(rng.integers(1, 6))
        A = rng.standard_normal((n, m))
        b = rng.standard_normal(n)
        res = solve_lp_regression(A, b, 2.0)
        x_ne = np.linalg.solve(A.T @ A, A.T @ b)
        z_ne = lc.vec_p_norm(A @ x_ne - b, 2.0)
        worst_p2 = max(worst_p2, abs(res.objective - z_ne) / max(z_ne, 1e-300))
    ok_p2 = worst_p2 <= 1e-10

    # 1-D grid oracle
    worst_l1 = 0.0
    for _ in range(10):
        A = rng.standard_normal((15, 1))
        b = rng.standard_normal(15)
        res = solve_lp_regression(A, b, 1.0)
        xs = np.arange(-5.0, 5.0 + 1e-3, 1e-3)
        objs = np.sum(np.abs(np.outer(A[:, 0], xs) - b[:, None]), axis=0)
        z_grid = float(objs.min())
        worst_l1 = max(worst_l1, abs(res.objective - z_grid) / (1.0 + z_grid))
    # 2-D grid oracle
    A = rng.standard_normal((12, 2))
    b = rng.standard_normal(12)
    res = solve_lp_regression(A, b, 1.0)
    axis = np.arange(-2.0, 2.0 + 2e-3, 2e-3)
    best = math.inf
    for x0 in axis:
        resid = np.abs((A[:, [0]] * x0 + np.outer(A[:, 1], axis)) - b[:, None])
        best = min(best, float(np.min(np.sum(resid, axis=0))))
    worst_l1 = max(worst_l1, abs(res.objective - best) / (1.0 + best))
    ok_l1 = worst_l1 <= 1e-3

    worst_grad = 0.0
    for p, mu in ((1.5, 1e-3), (3.0, 0.0)):
        for _ in range(10):
            A = rng.standard_normal((20, 3))
            b = rng.standard_normal(20)
            x = rng.standard_normal(3)
            worst_grad = max(
                worst_grad, lc.objective_gradient_check(A, b, p, x, h=1e-5, mu=mu)
            )
    ok_grad = worst_grad <= 1e-4
    elapsed = time.perf_counter() - t0
    gate(
        6,
        "solver oracle equivalence",
        ok_p2 and ok_l1 and ok_grad,
        f"p2-vs-normal-eqs {worst_p2:.2e} (<=1e-10), l1-vs-grid {worst_l1:.2e} "
        f"(<=1e-3), grad-vs-fd {worst_grad:.2e} (<=1e-4)",
        elapsed,
        120.0,
    )


def test_criterion_7_reductions():
    t0 = time.perf_counter()
    inst = lc.reference_instance(n=400, d=3, p=1.5, seed=7)
    cfg = scaled_config(1.5, 3, 0.1, stage1_target=80.0, stage2_target=120.0)

    winst = lc.RegressionInstance(A=inst.A, b=inst.b, p=1.5, weights=np.ones(400))
    plain = lc.two_stage_solve(inst, cfg, seed=3, compute_exact=True)
    weighted = lc.weighted_two_stage(winst, cfg, seed=3, compute_exact=True)
    from lpcoreset.io import report_to_dict

    def payload(rep):
        doc = report_to_dict(rep)
        doc.pop("timings_ms", None)
        doc.pop("config", None)
        return doc

    ok_weighted = payload(plain) == payload(weighted)

    minst = lc.RegressionInstance(A=inst.A, b=inst.b[:, None], p=1.5)
    gen = lc.generalized_two_stage(minst, cfg, seed=3, compute_exact=True)
    ok_gen = (
        np.array_equal(gen.coreset_indices, plain.coreset_indices)
        and abs(gen.final_objective - plain.final_objective)
        <= 1e-10 * (1.0 + plain.final_objective)
        and abs(gen.Z_exact - plain.Z_exact) <= 1e-10 * (1.0 + plain.Z_exact)
    )

    full = lc.two_stage_solve(
        inst,
        lc.SamplerConfig(p=1.5, d=3, epsilon=0.1, r1_scale=1e12, r2_scale=1e12),
        seed=3,
        compute_exact=True,
    )
    ok_full = abs(full.approx_ratio - 1.0) <= 1e-6
    elapsed = time.perf_counter() - t0
    gate(
        7,
        "reductions",
        ok_weighted and ok_gen and ok_full,
        f"weighted-unit-identical={ok_weighted}, generalized-1col={ok_gen}, "
        f"full-sampling ratio={full.approx_ratio:.9f}",
        elapsed,
        120.0,
    )


def test_criterion_8_determinism(tmp_path):
    t0 = time.perf_counter()
    inst_dir = tmp_path / "inst"
    generate_instance(150, 2, 1.5, "sparse-gross", 0.1, 11, str(inst_dir))
    solve_args = [
        "solve",
        "--input", str(inst_dir / "A.csv"),
        "--rhs", str(inst_dir / "b.csv"),
        "--p", "1.5",
        "--epsilon", "0.1",
        "--seed", "9",
        "--r1-scale", "1e-4",
        "--r2-scale", "1e-4",
        "--exact",
    ]
    texts = []
    for name in ("r1.json", "r2.json"):
        out = str(tmp_path / name)
        assert run_cli(solve_args + ["--output", out]) == 0
        doc = json.loads(open(out).read())
        doc.pop("timings_ms", None)
        texts.append(json_dumps(doc))
    ok_solve = texts[0] == texts[1]

    bench_texts = []
    for name in ("b1", "b2"):
        out = str(tmp_path / name)
        assert (
            run_cli(
                [
                    "bench",
                    "--seeds", "3",
                    "--p", "1.5",
                    "--n", "120",
                    "--d", "2",
                    "--epsilon", "0.1",
                    "--r1-scale", "1e-3",
                    "--r2-scale", "1e-3",
                    "--out", out,
                ]
            )
            == 0
        )
        bench_texts.append(open(f"{out}/bench.json").read())
    ok_bench = bench_texts[0] == bench_texts[1]
    elapsed = time.perf_counter() - t0
    gate(
        8,
        "byte-identical determinism",
        ok_solve and ok_bench,
        f"solve={ok_solve}, bench={ok_bench} (timings excluded)",
        elapsed,
        60.0,
    )


def test_criterion_9_sample_size_accounting(reference_2000):
    t0 = time.perf_counter()
    inst, basis, _ = reference_2000
    cfg = scaled_config(1.0, 4, 0.5, stage1_target=400.0, stage2_target=600.0)
    probs = lc.stage1_probabilities(basis, r1_default(cfg))
    expected = probs.sum()
    assert expected <= r1_default(cfg) + 1e-9  # E[sample] never exceeds r1
    counts = [
        lc.realize_sample(probs, 1.0, seed=lc.derive_seed(s, "c9")).actual_count
        for s in range(100)
    ]
    sigma_mean = math.sqrt(float(np.sum(probs * (1.0 - probs)))) / 10.0
    gap = abs(float(np.mean(counts)) - expected)
    ok = gap <= 3.0 * sigma_mean
    elapsed = time.perf_counter() - t0
    gate(
        9,
        "sample-size accounting",
        ok,
        f"mean count {np.mean(counts):.2f} vs expected {expected:.2f} "
        f"(gap {gap:.2f} <= 3 sigma = {3 * sigma_mean:.2f})",
        elapsed,
        120.0,
    )
