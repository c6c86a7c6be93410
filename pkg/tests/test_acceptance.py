"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 5-7 train real models and take several minutes each; they carry
the ``slow`` marker (deselect with ``-m "not slow"``).
"""

import time

import numpy as np
import pytest

from lsitcyto import classical, cli, elm, synth
from lsitcyto.cnn import TrainConfig, build_classifier, build_denoiser, denoise_images, predict, train, transfer_learn
from lsitcyto.cnn.gradcheck import check_gradients, toy_denoiser, toy_network
from lsitcyto.metrics import ClassMetrics, confusion, roc_auc, snr_imp
from oracles import oracle
from reference_data import REFERENCE_ROWS

VARIANCES = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0)


@pytest.fixture(scope="module")
def full_dataset():
    """Six classes, 1980 samples each (55 bases x 36 rotations), window 50."""
    return synth.build_dataset(seed=0)


def test_criterion_01_table_rows(acceptance_log):
    t0 = time.perf_counter()
    worst = 0.0
    for counts, expected in REFERENCE_ROWS.values():
        m = ClassMetrics(*counts)
        got = np.array([getattr(m, f) for f in ClassMetrics.FIELDS], dtype=float)
        worst = max(worst, float(np.abs(got - np.array(expected)).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 5e-5 and elapsed < 1.0
    acceptance_log(1, ok, f"max |metric - table| = {worst:.2e} over 6 rows x 8 fields ({elapsed * 1e3:.1f} ms)")
    assert ok


def test_criterion_02_oselm_equals_batch(acceptance_log):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(60):
        rng = np.random.default_rng([seed, 2])
        n = int(rng.integers(10, 201))
        d_hidden = int(rng.integers(5, 51))
        d_in = int(rng.integers(2, 16))
        model = elm.ElmModel.create(d_in, d_hidden, d_out=int(rng.integers(1, 5)), seed=seed, c_reg=float(10 ** rng.uniform(-1, 3)))
        x = rng.normal(size=(n, d_in))
        t = rng.normal(size=(n, model.d_out))
        batch = elm.train_batch(model, x, t).beta
        cuts = np.sort(rng.choice(np.arange(1, n), size=int(rng.integers(1, min(12, n - 1) + 1)), replace=False))
        parts = np.split(np.arange(n), cuts)
        state = elm.oselm_init(model, x[parts[0]], t[parts[0]])
        for p in parts[1:]:
            state = elm.oselm_update(state, x[p], t[p])
        worst = max(worst, float(np.abs(state.beta - batch).max() / np.abs(batch).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5 and elapsed < 30
    acceptance_log(2, ok, f"60 instances, max relative deviation {worst:.2e} ({elapsed:.1f} s)")
    assert ok


def test_criterion_03_gradcheck(acceptance_log):
    t0 = time.perf_counter()
    per_kind: dict[str, float] = {}
    for seed in range(20):
        rng = np.random.default_rng([seed, 3])
        nets = [
            (toy_network(rng, dropout=0.25 if seed % 2 else 0.0), rng.normal(size=(3, 1, 12, 12)), rng.integers(0, 3, 3)),
            (toy_denoiser(rng), rng.normal(size=(2, 1, 8, 8)), rng.normal(size=(2, 1, 8, 8))),
        ]
        for net, x, y in nets:
            report = check_gradients(net, x, y, dropout_seed=seed if seed % 2 else None)
            for (i, name), err in report.items():
                kind = "input" if i == "input" else f"{net.layers[i].kind}.{name}"
                per_kind[kind] = max(per_kind.get(kind, 0.0), err)
    elapsed = time.perf_counter() - t0
    worst = max(per_kind.values())
    ok = worst <= 1e-4 and elapsed < 120
    detail = ", ".join(f"{k} {v:.1e}" for k, v in sorted(per_kind.items()))
    acceptance_log(3, ok, f"40 toy networks, max relative error {worst:.1e} [{detail}] ({elapsed:.0f} s)")
    assert ok


def test_criterion_04_classifier_shapes(acceptance_log):
    net = build_classifier(50, 6)
    chain = [net.shapes[0][1]] + [s[1] if len(s) == 3 else s[0] for s in net.shapes[1:-1]]
    expected = [50, 48, 46, 15, 13, 4, 256, 128, 64, 6]
    ok = chain == expected
    acceptance_log(4, ok, "shapes " + "->".join(map(str, chain)))
    assert ok


@pytest.mark.slow
def test_criterion_05_classification(acceptance_log, full_dataset):
    t0 = time.perf_counter()
    assert list(full_dataset.counts()["train"] + full_dataset.counts()["val"] + full_dataset.counts()["test"]) == [1980] * 6
    net = build_classifier(50, 6, seed=0)
    net, _ = train(net, full_dataset, TrainConfig(epochs=2, batch_size=32, lr=1e-3, seed=0, max_val_samples=540))
    x, y = full_dataset.split("test")
    pred, probs = predict(net, x)
    acc = confusion(y, pred, 6).accuracy()
    aucs = [c.auc for c in roc_auc(probs, y)]
    elapsed = time.perf_counter() - t0
    ok = acc >= 0.95 and min(aucs) >= 0.98 and elapsed <= 30 * 60
    acceptance_log(5, ok, f"test accuracy {acc:.4f}, min per-class AUC {min(aucs):.4f} over {len(y)} images ({elapsed / 60:.1f} min)")
    assert ok


@pytest.mark.slow
def test_criterion_06_denoising_gain(acceptance_log, full_dataset):
    t0 = time.perf_counter()
    net = build_denoiser(50, seed=0)
    cfg = TrainConfig(epochs=4, batch_size=16, lr=1e-3, seed=0, max_samples_per_epoch=2000, max_val_samples=64, patch_size=32)
    net, _ = train(net, full_dataset, cfg)
    x_train, _ = full_dataset.split("train")
    elm_model = elm.fit_denoiser(elm.create_denoiser(50, seed=0), x_train, VARIANCES, copies=2, seed=0)
    clean, _ = full_dataset.split("test")
    clean = clean[::12]
    rows = []
    ok = True
    for var in VARIANCES:
        rng = np.random.default_rng([int(var), 6])
        noisy = synth.add_noise_per_sample(clean, np.full(len(clean), var), rng)
        cnn_gain = snr_imp(clean, noisy, denoise_images(net, noisy)).mean
        med_gain = snr_imp(clean, noisy, classical.denoise_stack(noisy, classical.DEFAULT_FILTERS["median"])).mean
        ok &= cnn_gain >= 3.0 and cnn_gain > med_gain
        row = f"{var:.0f}: cnn {cnn_gain:.2f} / median {med_gain:.2f}"
        if var == 100.0:
            elm_gain = snr_imp(clean, noisy, elm.denoise(elm_model, noisy)).mean
            ok &= elm_gain >= 2.0
            row += f" / elm {elm_gain:.2f}"
        rows.append(row)
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 45 * 60
    acceptance_log(6, ok, f"mean SNR_imp dB on {len(clean)} held-out images [{'; '.join(rows)}] ({elapsed / 60:.1f} min)")
    assert ok


@pytest.mark.slow
def test_criterion_07_transfer(acceptance_log, full_dataset):
    t0 = time.perf_counter()
    names = [c for c in full_dataset.class_names if c != "bead20"]
    five = full_dataset.select_classes(names)
    six = full_dataset.select_classes(names + ["bead20"])
    net = build_classifier(50, 5, seed=0)
    net, _ = train(net, five, TrainConfig(epochs=1, batch_size=32, seed=0, max_val_samples=300))
    x, y = six.split("test")
    new = y == 5
    pre, _ = predict(net, x[new])
    pre_recall = float(np.mean(pre == 5))
    frozen = {k: v.copy() for k, v in net.parameters(trainable_only=False).items()}
    wide, _ = transfer_learn(net, six, 6, TrainConfig(epochs=20, batch_size=32, lr=1e-2, seed=0, patience=5))
    post, _ = predict(wide, x)
    post_recall = float(np.mean(post[new] == 5))
    head = len(wide.layers) - 2
    unchanged = all(np.array_equal(wide.layers[i].params[n], a) for (i, n), a in frozen.items() if i != head)
    elapsed = time.perf_counter() - t0
    ok = pre_recall == 0.0 and post_recall >= 0.9 and unchanged and elapsed <= 10 * 60
    acceptance_log(
        7,
        ok,
        f"new-class recall {pre_recall:.3f} before, {post_recall:.3f} after; overall {np.mean(post == y):.3f}; "
        f"frozen params bitwise unchanged: {unchanged} ({elapsed / 60:.1f} min)",
    )
    assert ok


def test_criterion_08_filter_oracles(acceptance_log):
    rng = np.random.default_rng(8)
    worst = {k: 0.0 for k in classical.FILTER_KINDS}
    for _ in range(200):
        h, w = (int(v) for v in rng.integers(1, 17, size=2))
        img = rng.uniform(0, 255, (h, w))
        k = int(rng.choice([1, 3, 5]))
        for kind in classical.FILTER_KINDS:
            spec = classical.FilterSpec(kind, k, sigma_spatial=3.0 if kind == "bilateral" else None)
            got = classical.apply_filter(img, spec)
            worst[kind] = max(worst[kind], float(np.abs(got - oracle(img, kind, k)).max()))
    ok = max(worst.values()) <= 1e-5
    acceptance_log(8, ok, "200 images, max abs error " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_09_snr_identities(acceptance_log):
    rng = np.random.default_rng(9)
    clean = rng.uniform(0, 255, (5, 12, 12))
    noisy = clean + rng.normal(0, 10, clean.shape)
    identity = snr_imp(clean, noisy, noisy)
    worked = snr_imp(np.array([3.0, 4.0]), np.array([3.0, 5.0]), np.array([3.0, 4.5])).mean
    ok = bool(np.all(identity.snr_imp == 0.0)) and abs(worked - 6.0206) <= 1e-3
    acceptance_log(9, ok, f"identity max |imp| {np.abs(identity.snr_imp).max():.1e}; worked example {worked:.4f} dB")
    assert ok


def test_criterion_10_determinism(acceptance_log, tmp_path):
    def pipeline(root):
        steps = [
            ["synth", "--out", root / "ds", "--window", 36, "--base-per-class", 3, "--split", "36,36,36", "--seed", 10],
            ["train-classifier", "--data", root / "ds", "--epochs", 2, "--max-samples", 64, "--seed", 10, "--out", root / "clf"],
            ["eval", "--model", root / "clf" / "model", "--data", root / "ds", "--maps", 1, "--out", root / "ev"],
            ["train-denoiser", "--data", root / "ds", "--model", "cnn", "--epochs", 1, "--max-samples", 16, "--patch-size", 16, "--seed", 10, "--out", root / "den"],
            ["train-denoiser", "--data", root / "ds", "--model", "elm", "--hidden", 200, "--seed", 10, "--out", root / "elm"],
            ["corrupt", "--data", root / "ds", "--variance", "100,600", "--seed", 10, "--out", root / "noisy"],
            ["denoise", "--input", root / "noisy", "--method", "cnn", "--checkpoint", root / "den" / "model", "--out", root / "dn"],
        ]
        for argv in steps:
            assert cli.main([str(a) for a in argv]) == 0
        return {d: cli.read_run_hashes(root / d) for d in ("ds", "clf", "ev", "den", "elm", "noisy", "dn")}

    a = pipeline(tmp_path / "a")
    b = pipeline(tmp_path / "b")
    n_files = sum(len(v) for v in a.values())
    differing = [f"{d}/{f}" for d in a for f in a[d] if a[d][f] != b[d].get(f)]
    ok = a == b and n_files > 0
    acceptance_log(10, ok, f"{n_files} artifacts across 7 commands hashed identically" if ok else f"differing: {differing}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-s"]))
