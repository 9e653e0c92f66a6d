"""Acceptance criteria, one test each.

Every test prints a single ``CRITERION <n> PASS|FAIL`` line (visible even
under output capture) before asserting.  Run on its own with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import sys
import time
import warnings

import numpy as np
import pytest

from ppcs import container
from ppcs.dictionaries import make_db10, make_dct
from ppcs.keys import (
    apply_bipolar,
    frobenius_distance,
    gen_bipolar,
    gen_matrix_key,
    identity_bipolar,
    identity_matrix_key,
    make_estimated_key,
    permute_columns,
)
from ppcs.metrics import classify, prd, prdn, quality, snr
from ppcs.protocol import (
    IntermediateCipher,
    PublicRecoveryPackage,
    RecoveryWarning,
    cloud_recover,
    encrypt_operator,
    run_pipeline,
    sensor_encode,
    user_decrypt,
)
from ppcs.sensing import make_dbbd_phi, make_gaussian_phi, mutual_coherence
from ppcs.signal_io import SignalWindow, synthetic_ecg
from ppcs.solvers import SolverParams, brute_force, omp


@pytest.fixture
def report(capsys):
    def emit(number: int, passed: bool, detail: str, elapsed: float):
        with capsys.disabled():
            status = "PASS" if passed else "FAIL"
            print(f"\nCRITERION {number} {status} ({elapsed:.2f}s): {detail}")

    return emit


def _k_sparse(l: int, k: int, rng) -> np.ndarray:
    s = np.zeros(l)
    s[rng.choice(l, size=k, replace=False)] = rng.normal(size=k)
    return s


def test_criterion_1_end_to_end_round_trip(report):
    n, m, k, runs = 512, 128, 16, 100
    t0 = time.perf_counter()
    psi = make_dct(n)
    ok = 0
    worst = 0.0
    for seed in range(runs):
        rng = np.random.default_rng(seed)
        x = psi.matrix @ _k_sparse(n, k, rng)
        phi = make_gaussian_phi(m, n, 1000 + seed)
        q, p = gen_matrix_key(m, 2000 + seed), gen_bipolar(n, 1.0, 3000 + seed)
        x_rec, _ = run_pipeline(x, phi, psi, q, p, "omp")
        err = np.linalg.norm(x_rec.samples - x) / np.linalg.norm(x)
        ok += err < 1e-6
        worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    passed = ok >= 99 and elapsed < 30
    report(1, passed, f"{ok}/{runs} windows below 1e-6 relative error (worst {worst:.2e})", elapsed)
    assert passed


def test_criterion_2_secure_equals_ordinary(report):
    n, windows = 1024, [synthetic_ecg(1024, 200 + i) for i in range(5)]
    psi = make_db10(n, 4)
    t0 = time.perf_counter()
    worst = 0.0
    rows = []
    for m in (512, 256, 128):  # compression 50 %, 75 %, 87.5 %
        phi = make_dbbd_phi(m, n)
        params = SolverParams(max_sparsity=3 * m // 4)
        secure_keys = (gen_matrix_key(m, 5), gen_bipolar(n, 1.0, 6))
        plain_keys = (identity_matrix_key(m), identity_bipolar(n, 1.0))
        for x in windows:
            sec, _ = run_pipeline(x, phi, psi, *secure_keys, "omp", params)
            pla, _ = run_pipeline(x, phi, psi, *plain_keys, "omp", params)
            delta = abs(snr(prd(x, sec)) - snr(prd(x, pla)))
            worst = max(worst, delta)
            rows.append(delta)
    elapsed = time.perf_counter() - t0
    passed = worst < 0.1 and elapsed < 120
    report(2, passed, f"max |SNR secure - SNR ordinary| = {worst:.2e} dB over {len(rows)} window runs", elapsed)
    assert passed


def test_criterion_3_coherence_invariance(report):
    n = 500
    psi = make_dct(n)
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    for m in (50, 100, 125, 250):
        for phi in (make_gaussian_phi(m, n, m), make_dbbd_phi(m, n)):
            plain = mutual_coherence(phi, psi)
            for seed in range(10):
                p = gen_bipolar(n, 1.0 + seed, seed)
                worst = max(worst, abs(mutual_coherence(phi, permute_columns(psi.matrix, p)) - plain))
                count += 1
    elapsed = time.perf_counter() - t0
    passed = worst <= 1e-12 and elapsed < 60
    report(3, passed, f"max |mu(Phi, Psi P) - mu(Phi, Psi)| = {worst:.1e} over {count} cases", elapsed)
    assert passed


def test_criterion_4_frobenius_distances(report):
    l = 1000
    p = gen_bipolar(l, 1.0, 7)
    t0 = time.perf_counter()
    means = {}
    for r in (99, 98, 97):
        means[r] = float(np.mean([frobenius_distance(p, make_estimated_key(p, r, s)) for s in range(20)]))
    elapsed = time.perf_counter() - t0
    targets = {99: 4.47, 98: 6.32, 97: 7.73}
    passed = all(abs(means[r] - targets[r]) <= 0.05 * targets[r] for r in targets) and elapsed < 60
    detail = ", ".join(f"E^{r}: {means[r]:.3f} (target {targets[r]})" for r in targets)
    report(4, passed, detail, elapsed)
    assert passed


def test_criterion_5_attack_degradation(report):
    n, m = 1024, 128  # M/N = 1/8
    psi = make_db10(n, 4)
    phi = make_dbbd_phi(m, n)
    q, p = gen_matrix_key(m, 1), gen_bipolar(n, 1.0, 2)
    a_star = encrypt_operator(phi, psi, q, p)
    params = SolverParams(max_sparsity=96)
    records = [synthetic_ecg(n, 100 + i) for i in range(5)]
    attack_seeds = range(10)
    ladder = (90, 80, 70)
    t0 = time.perf_counter()
    true_ok = 0
    e97_ok = 0
    ordered = 0
    runs = 0
    for x in records:
        pkg = sensor_encode(x, phi, psi, q, p, a_star=a_star)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RecoveryWarning)
            ic = cloud_recover(pkg, "omp", params)
        base = prd(x, user_decrypt(ic, p, psi))
        true_ok += base < 2.0
        for seed in attack_seeds:
            runs += 1
            e97 = prd(x, user_decrypt(ic, make_estimated_key(p, 97, seed), psi))
            e97_ok += e97 >= 9.0
            chain = [base] + [prd(x, user_decrypt(ic, make_estimated_key(p, r, seed), psi)) for r in ladder]
            ordered += all(b >= a for a, b in zip(chain, chain[1:]))
    elapsed = time.perf_counter() - t0
    clause_true = true_ok == len(records)
    clause_e97 = e97_ok == runs
    clause_order = ordered >= 0.9 * runs
    passed = clause_true and clause_e97 and clause_order
    detail = (
        f"true key < 2%: {true_ok}/{len(records)} records; "
        f"E^97 >= 9%: {e97_ok}/{runs} runs (needs all); "
        f"ordering 100>90>80>70 holds in {ordered}/{runs} (needs >= 90%)"
    )
    report(5, passed, detail, elapsed)
    assert clause_true and clause_order
    assert clause_e97, detail


def test_criterion_6_public_matrix_gaussianity(report):
    m, n, alpha = 128, 512, 1.0
    psi = make_dct(n)
    t0 = time.perf_counter()
    mean_band = 3 * (alpha / m) / math.sqrt(m * n)
    worst_mean, worst_var = 0.0, 0.0
    ok = 0
    for seed in range(10):
        phi = make_gaussian_phi(m, n, seed)
        # A* = Phi Psi P with no matrix key, the setting of the variance derivation
        a = encrypt_operator(phi, psi, identity_matrix_key(m), gen_bipolar(n, alpha, 100 + seed))
        mean_err = abs(a.mean())
        var_err = abs(a.var() / (alpha**2 / m**2) - 1)
        worst_mean = max(worst_mean, mean_err / mean_band)
        worst_var = max(worst_var, var_err)
        ok += mean_err <= mean_band and var_err <= 0.05
    elapsed = time.perf_counter() - t0
    passed = ok == 10 and elapsed < 30
    report(6, passed, f"{ok}/10 seeds in band (worst mean {worst_mean:.2f} of the 3-sigma band, "
                      f"worst variance error {100 * worst_var:.2f}%)", elapsed)
    assert passed


def test_criterion_7_omp_matches_brute_force(report):
    l, m, k, runs = 16, 8, 2, 200
    t0 = time.perf_counter()
    converged = 0
    matched = 0
    for seed in range(runs):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(m, l)) / math.sqrt(m)
        z = _k_sparse(l, k, rng)
        y = a @ z
        o = omp(a, y, SolverParams(max_sparsity=k))
        if not o.converged:
            continue
        converged += 1
        b = brute_force(a, y, k)
        matched += b.support == o.support and np.allclose(b.coeffs, o.coeffs, rtol=0, atol=1e-10)
    elapsed = time.perf_counter() - t0
    passed = matched == converged and converged >= 0.95 * runs and elapsed < 10
    report(7, passed, f"OMP converged on {converged}/{runs}; brute force agrees on {matched}/{converged}", elapsed)
    assert passed


def test_criterion_8_metric_identities(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    snr_exact = all(snr(v) == -20 * math.log10(v / 100) for v in rng.uniform(1e-4, 1e4, size=1000))
    worst = 0.0
    for _ in range(200):
        x = rng.normal(size=256)
        x -= x.mean()
        xt = x + rng.uniform(0.01, 1) * rng.normal(size=256)
        worst = max(worst, abs(prdn(x, xt) - prd(x, xt)) / prd(x, xt))
    bands = (classify(1.8), classify(30.3), classify(2.0))
    bands_ok = bands == ("very_good", "undetermined", "good")
    report_ok = all(
        abs(r.snr + 20 * math.log10(r.prd / 100)) < 1e-9
        for r in (quality(rng.normal(size=64) + 3, rng.normal(size=64)) for _ in range(50))
    )
    elapsed = time.perf_counter() - t0
    passed = snr_exact and worst <= 1e-12 and bands_ok and report_ok
    report(8, passed, f"snr formula exact: {snr_exact}; max prdn/prd gap on zero-mean input {worst:.1e}; "
                      f"bands for 1.8/30.3/2.0 = {'/'.join(bands)}", elapsed)
    assert passed


def test_criterion_9_structural_invariants(report):
    t0 = time.perf_counter()
    failures = []
    for n, alpha, seed in ((1, 1.0, 0), (64, 0.5, 1), (1000, 2.0, 2)):
        d = gen_bipolar(n, alpha, seed).dense()
        if np.max(np.abs(d.T @ d - alpha**2 * np.eye(n))) > 1e-12:
            failures.append(f"P^T P at n={n}")
    for psi in (make_dct(8), make_dct(512), make_db10(64, 2), make_db10(1024, 4), make_db10(512, 5)):
        if np.max(np.abs(psi.matrix.T @ psi.matrix - np.eye(psi.n))) > 1e-10:
            failures.append(f"Psi^T Psi for {psi.kind} n={psi.n}")
    for m, n in ((2, 4), (128, 512), (125, 500), (64, 1024)):
        phi = make_dbbd_phi(m, n).matrix
        b = n // m
        expected = np.kron(np.eye(m), np.ones((1, b)))
        if not np.array_equal(phi, expected) or not np.array_equal(phi @ phi.T, b * np.eye(m)):
            failures.append(f"DBBD {m}x{n}")
    values = [
        np.eye(2),
        SignalWindow(np.arange(5.0), 250.0, "r"),
        make_db10(64, 2),
        make_gaussian_phi(4, 16, 1),
        make_dbbd_phi(4, 16),
        gen_matrix_key(16, 3),
        gen_bipolar(100, 0.7, 4),
        PublicRecoveryPackage(np.ones((2, 3)), np.ones(2), 3, "omp"),
        IntermediateCipher(np.arange(3.0), 0.5, "sl0", 7, False),
    ]
    for v in values:
        back = container.deserialize(container.serialize(v))
        same = back.tobytes() == v.tobytes() if isinstance(v, np.ndarray) else back == v
        if not same:
            failures.append(f"container round trip {type(v).__name__}")
    rng = np.random.default_rng(5)
    for seed in range(50):
        p = gen_bipolar(256, 1.3, seed)
        s = _k_sparse(256, int(rng.integers(0, 40)), rng)
        if np.count_nonzero(apply_bipolar(p, s)) != np.count_nonzero(s):
            failures.append(f"sparsity under P, seed {seed}")
    elapsed = time.perf_counter() - t0
    passed = not failures and elapsed < 10
    report(9, passed, "all invariants hold" if not failures else "; ".join(failures), elapsed)
    assert passed


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
