"""End-to-end acceptance checks; each prints a PASS/FAIL line in the summary."""

import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from tvdopt.consensus import distance_to_consensus, rounds_needed, run_consensus
from tvdopt.harness.experiment import load_config, run_experiment
from tvdopt.harness.libsvm import synthetic_dataset, write_libsvm
from tvdopt.harness.reference import solve_reference
from tvdopt.objectives import coercivity_check, estimate_constants, logistic_objective, quadratic_family
from tvdopt.optimizers import (
    SolverConfig,
    communication_budget,
    contraction_threshold,
    decentralized_projected_gd,
    epsilon1_for_target,
    exact_projected_gd,
    outer_contraction_factor,
    outer_iteration_count,
)
from tvdopt.topology import build_schedule, complete_graph, verify_assumption, window_product


def report(number, title, ok, elapsed, limit, detail=""):
    ok = bool(ok) and elapsed < limit
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] {number}. {title} ({elapsed:.2f}s / limit {limit:g}s) {detail}".rstrip())
    assert ok, f"criterion {number} failed: {detail} elapsed={elapsed:.2f}s"


def small_logistic(seed=0, n=10):
    rng = np.random.default_rng(seed)
    shards = [(rng.standard_normal((12, 5)), rng.integers(0, 2, 12)) for _ in range(n)]
    return logistic_objective(shards, lam=0.05)


def test_1_consensus_contraction(alternating3, random10):
    t0 = time.perf_counter()
    worst = -np.inf
    sufficient = True
    for s in (alternating3, random10):
        B = s.B
        delta = verify_assumption(s, B, 20 * B).delta_hat
        X0 = np.random.default_rng(1).standard_normal((2, s.n))
        d0 = distance_to_consensus(X0)
        X = X0
        for m in range(1, 21):
            X, _ = run_consensus(X, s, (m - 1) * B, B)
            worst = max(worst, distance_to_consensus(X) / (delta**m * d0 * (1 + 1e-9)))
        for eps in (1e-1, 1e-3, 1e-6):
            k = rounds_needed(d0, eps * d0, delta, B)
            if k > 20 * B:
                # the estimate must cover every window the run touches
                delta = verify_assumption(s, B, k).delta_hat
                k = rounds_needed(d0, eps * d0, delta, B)
            Xk, used = run_consensus(X0, s, 0, k)
            sufficient &= used == k and distance_to_consensus(Xk) <= eps * d0
    elapsed = time.perf_counter() - t0
    report(1, "consensus contraction", worst <= 1.0 and sufficient, elapsed, 1.0,
           f"max dist/bound={worst:.3f} rounds_needed sufficient={sufficient}")


def test_2_exact_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for obj in (quadratic_family(10, 0.1), small_logistic()):
        c = estimate_constants(obj)
        s = build_schedule("fixed", obj.n, graph=complete_graph(obj.n))
        x0 = np.random.default_rng(2).standard_normal(obj.d)
        ex = exact_projected_gd(obj, c, x0, 100, keep_iterates=True)
        de = decentralized_projected_gd(obj, c, s, x0, SolverConfig(100, rounds=1), keep_iterates=True)
        x = x0.copy()
        step = 1.0 / (c.mu_f + c.L_f)
        for k in range(101):
            central = np.repeat(x[:, None], obj.n, axis=1)
            worst = max(worst, np.abs(ex.iterates[k] - central).max(), np.abs(de.iterates[k] - ex.iterates[k]).max())
            x = x - step * obj.grad_f(x)
    elapsed = time.perf_counter() - t0
    report(2, "exact-oracle equivalence", worst <= 1e-10, elapsed, 5.0, f"max deviation={worst:.2e}")


def test_3_outer_contraction(random10):
    t0 = time.perf_counter()
    obj = quadratic_family(10, 0.1)
    c = estimate_constants(obj)
    ref = solve_reference(obj, c)
    eps = 1e-6
    eps1 = epsilon1_for_target(eps, c.n, c.mu_f, c.L_max)
    x0 = np.full(10, 0.1)
    N = outer_iteration_count(eps, math.sqrt(10) * np.linalg.norm(x0), c)
    tr = decentralized_projected_gd(obj, c, random10, x0, SolverConfig(N, eps1=eps1), reference=ref)
    thr, q = contraction_threshold(eps1, c), outer_contraction_factor(c)
    r2 = tr.r_k**2
    violations = sum(1 for k in range(N) if r2[k] >= thr and r2[k + 1] > r2[k] * q + 1e-12)
    final = tr.dist_sq_to_opt[-1]
    elapsed = time.perf_counter() - t0
    report(3, "outer-step contraction", violations == 0 and final <= eps, elapsed, 30.0,
           f"N={N} violations={violations} final={final:.2e}")


def test_4_budget_soundness(random10):
    t0 = time.perf_counter()
    obj = quadratic_family(10, 0.1)
    c = estimate_constants(obj)
    ref = solve_reference(obj, c)
    delta = verify_assumption(random10, random10.B, 400).delta_hat
    x0 = np.full(10, 0.1)
    r0 = math.sqrt(10) * np.linalg.norm(x0)
    details, ok = [], True
    for eps in (1e-4, 1e-6):
        b = communication_budget(eps, r0, c, random10.B, delta, ref.grad_norm_at_star)
        tr = decentralized_projected_gd(obj, c, random10, x0, SolverConfig(b.N_outer, eps1=b.eps1),
                                        reference=ref, delta_hat=delta)
        ok &= tr.comms[-1] <= b.total_comm and tr.dist_sq_to_opt[-1] <= eps
        details.append(f"eps={eps:g}: used {tr.comms[-1]} <= {b.total_comm}")
    b1 = communication_budget(1e-4, r0, c, 1, delta, ref.grad_norm_at_star)
    b2 = communication_budget(1e-4, r0, c, 2, delta, ref.grad_norm_at_star)
    b4 = communication_budget(1e-4, r0, c, 4, delta, ref.grad_norm_at_star)
    linear = b2.total_comm == 2 * b1.total_comm and b4.total_comm == 4 * b1.total_comm
    elapsed = time.perf_counter() - t0
    report(4, "budget soundness", ok and linear, elapsed, 30.0, "; ".join(details) + f"; linear in B={linear}")


def test_5_constant_ratios():
    t0 = time.perf_counter()
    ok, details = True, []
    for n, a in ((4, 1.0), (10, 0.1), (100, 0.01)):
        c = estimate_constants(quadratic_family(n, a))
        rL, rmu = c.L_sum / c.L_f, c.mu_f / c.mu_sum
        ok &= rL == pytest.approx((n + a) / (1 + a), rel=1e-14) and rmu == pytest.approx((1 + a) / a, rel=1e-14)
        details.append(f"(n={n}, a={a:g}): {rL:.4g}, {rmu:.4g}")
        if n == 100:
            ok &= rL > 50 and rmu > 100
    elapsed = time.perf_counter() - t0
    report(5, "aggregate vs summed constants", ok, elapsed, 1.0, "; ".join(details))


@pytest.mark.slow
def test_6_qualitative_orderings(tmp_path):
    t0 = time.perf_counter()
    write_libsvm(tmp_path / "train.svm", synthetic_dataset(1000, 30, seed=1))
    raw = {
        "seed": 0,
        "output": "orderings.csv",
        "fgap_target": 1e-4,
        "objective": {"kind": "logistic", "path": "train.svm"},
        "topology": {"kind": "random-gilbert", "n": 10, "seed": 7, "B": 1, "p": 0.3, "horizon": 200},
        "methods": [
            {"type": "proj-gd", "rounds": 1, "N": 1500},
            {"type": "proj-gd", "rounds": 5, "N": 600},
            {"type": "proj-gd", "rounds": 20, "N": 400},
            {"type": "accelerated", "rounds": 5, "N": 300},
            {"type": "diging", "alpha": "grid", "N": 600},
        ],
    }
    (tmp_path / "cfg.json").write_text(json.dumps(raw))
    res = run_experiment(load_config(tmp_path / "cfg.json"))
    tr = res.trajectories
    c4 = {mid: t.comms_to_reach(1e-4) for mid, t in tr.items()}
    c3 = {mid: t.comms_to_reach(1e-3) for mid, t in tr.items()}
    fixed = ["proj-gd-1", "proj-gd-5", "proj-gd-20"]
    reached = [c4[m] for m in fixed if c4[m] is not None]
    best_fixed = min(reached) if reached else math.inf
    acc, dig = c4["accelerated-5"], c4["diging"]
    ordering = acc is not None and acc < best_fixed and (dig is None or acc < dig)
    distinct = all(c3[m] is not None for m in fixed) and len({c3[m] for m in fixed}) == 3
    no_beat = min(t.fgap.min() for t in tr.values()) >= -1e-12
    elapsed = time.perf_counter() - t0
    report(6, "qualitative orderings", ordering and distinct and no_beat and not res.failures, elapsed, 300.0,
           f"to 1e-4: acc={acc} best proj-gd={best_fixed} diging={dig}; to 1e-3: "
           + ", ".join(f"{m}={c3[m]}" for m in fixed))


def test_7_property_suites(tmp_path, alternating3, random10):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    failures = []

    # Young and reverse-triangle inequalities
    worst = np.inf
    for _ in range(1000):
        u, v = rng.standard_normal((2, 5)) * rng.uniform(0.01, 100.0)
        p = rng.uniform(1e-3, 0.999)
        worst = min(worst, (u @ u) / (2 * p) + p * (v @ v) / 2 - u @ v)
        worst = min(worst, v @ v - (p * (u @ u) - p / (1 - p) * ((v - u) @ (v - u))))
    if worst < -1e-9:
        failures.append(f"inequality slack {worst:.2e}")

    objectives = {"quadratic": quadratic_family(6, 0.3), "logistic": small_logistic(3, n=6)}
    for name, obj in objectives.items():
        c = estimate_constants(obj)
        if not coercivity_check(obj, c, trials=100, seed=1).passed:
            failures.append(f"coercivity {name}")
        h = 1e-6
        for _ in range(50):
            x = rng.standard_normal(obj.d)
            i = int(rng.integers(obj.n))
            fd = np.array([(obj.value(i, x + h * e) - obj.value(i, x - h * e)) / (2 * h) for e in np.eye(obj.d)])
            if not np.allclose(fd, obj.gradient(i, x), rtol=1e-6, atol=1e-7):
                failures.append(f"finite differences {name}")
                break

    for s in (alternating3, random10, build_schedule("fixed", 5, graph=complete_graph(5))):
        for k in range(s.B - 1, 40):
            P = window_product(s, k, s.B)
            if max(np.abs(P.sum(0) - 1).max(), np.abs(P.sum(1) - 1).max()) > 1e-12:
                failures.append("window product not doubly stochastic")
        X = rng.standard_normal((3, s.n))
        Y, _ = run_consensus(X, s, 5, 30)
        if not np.allclose(Y.mean(axis=1), X.mean(axis=1), atol=1e-12):
            failures.append("consensus mean drift")

    raw = {
        "objective": {"kind": "quadratic", "alpha": 0.1},
        "topology": {"kind": "random-gilbert", "n": 8, "seed": 5, "B": 2, "p": 0.3},
        "methods": [{"type": "proj-gd", "rounds": 3, "N": 30}, {"type": "extra", "N": 30}],
        "output": "det.csv",
    }
    (tmp_path / "det.json").write_text(json.dumps(raw))
    cfg = load_config(tmp_path / "det.json")
    first = run_experiment(cfg).csv_path.read_bytes()
    if run_experiment(cfg).csv_path.read_bytes() != first:
        failures.append("CSV not byte-identical")

    elapsed = time.perf_counter() - t0
    report(7, "property suites", not failures, elapsed, 60.0, "; ".join(failures) or "all properties hold")
