"""Tests of the desk-scale MLP trainer."""

import math

import numpy as np
import pytest

from eoc_lab.solver import solve_init
from eoc_lab.trainer import (
    TrainConfig,
    forward,
    init_params,
    load_digits_csv,
    loss_and_grads,
    make_blobs,
    normalize_inputs,
    observed_sparsity,
    train,
    write_training_log,
)


def small_config(**overrides):
    base = dict(
        init=solve_init("crelu", 0.85, 1.0, 0.7),
        depth=3,
        width=5,
        epochs=2,
        lr=0.05,
        batch=8,
        seed=7,
        dataset="synthetic-blobs",
        n_samples=64,
        input_dim=6,
        n_classes=3,
    )
    base.update(overrides)
    return TrainConfig(**base)


class TestGradients:
    def test_backprop_matches_finite_differences(self):
        """Analytic gradients vs central differences on 50 coordinates of a
        depth-3 width-5 net, relative 1e-4."""
        config = small_config()
        x_raw, y = make_blobs(config.seed, config.n_samples, config.input_dim, config.n_classes)
        x = normalize_inputs(x_raw, config.init.q_star)[:16]
        y = y[:16]
        params = init_params(config)
        spec = config.init.spec

        # finite differences are only trustworthy away from the kinks
        h_list, _ = forward(params, spec, x)
        margin = min(
            float(np.min(np.abs(h[:, :, None] - np.array(spec.kinks())[None, None, :])))
            for h in h_list[:-1]
        )
        assert margin > 1e-4

        loss0, grads = loss_and_grads(params, spec, x, y)
        assert math.isfinite(loss0)

        rng = np.random.default_rng(11)
        step = 1e-6
        checked = 0
        while checked < 50:
            layer = int(rng.integers(0, config.depth))
            w, b = params[layer]
            pick_bias = bool(rng.integers(0, 2))
            target = b if pick_bias else w
            idx = tuple(int(rng.integers(0, s)) for s in target.shape)

            def perturbed(sign):
                new = [(wi.copy(), bi.copy()) for wi, bi in params]
                tgt = new[layer][1] if pick_bias else new[layer][0]
                tgt[idx] += sign * step
                return loss_and_grads(new, spec, x, y)[0]

            fd = (perturbed(+1.0) - perturbed(-1.0)) / (2.0 * step)
            analytic = (grads[layer][1] if pick_bias else grads[layer][0])[idx]
            assert analytic == pytest.approx(fd, rel=1e-4, abs=1e-9)
            checked += 1

    def test_initialisation_law(self):
        """Drawn hidden weights match the configured variance within 2
        percent at width 256."""
        init = solve_init("crelu", 0.85, 1.0, 0.7)
        config = small_config(init=init, depth=3, width=256, input_dim=256, n_samples=8)
        params = init_params(config)
        w2 = params[1][0]
        assert float(np.var(w2)) == pytest.approx(init.sw2 / 256, rel=0.02)
        b2 = params[1][1]
        assert float(np.var(b2)) == pytest.approx(init.sb2, rel=0.25)

    def test_first_layer_preserves_input_variance(self):
        config = small_config(depth=3, width=128, input_dim=64, n_samples=256)
        x_raw, _ = make_blobs(config.seed, config.n_samples, config.input_dim, config.n_classes)
        x = normalize_inputs(x_raw, config.init.q_star)
        params = init_params(config)
        h1 = x @ params[0][0].T + params[0][1]
        assert float(np.mean(h1 * h1)) == pytest.approx(config.init.q_star, rel=0.1)


class TestDatasets:
    def test_blobs_deterministic(self):
        a = make_blobs(3, 100, 8, 4)
        b = make_blobs(3, 100, 8, 4)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_normalisation(self):
        x, _ = make_blobs(5, 50, 16, 4)
        z = normalize_inputs(x, 3.0)
        assert np.allclose(z.mean(axis=1), 0.0, atol=1e-12)
        assert np.allclose(z.var(axis=1), 3.0, rtol=1e-10)

    def test_digits_csv_roundtrip(self, tmp_path):
        path = tmp_path / "digits.csv"
        rng = np.random.default_rng(9)
        rows = rng.integers(0, 17, size=(40, 64))
        labels = rng.integers(0, 10, size=40)
        with open(path, "w") as fh:
            fh.write("label," + ",".join(f"pixel_{i}" for i in range(64)) + "\n")
            for lbl, row in zip(labels, rows):
                fh.write(str(int(lbl)) + "," + ",".join(str(int(v)) for v in row) + "\n")
        x, y = load_digits_csv(str(path))
        assert x.shape == (40, 64)
        assert np.array_equal(y, labels)

    def test_digits_csv_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            load_digits_csv(str(path))

    def test_training_on_digit_csv(self, tmp_path):
        path = tmp_path / "digits.csv"
        rng = np.random.default_rng(13)
        labels = np.arange(120) % 3
        # three distinguishable pixel patterns plus noise
        base = rng.integers(0, 17, size=(3, 64))
        rows = np.clip(base[labels] + rng.integers(-2, 3, size=(120, 64)), 0, 16)
        with open(path, "w") as fh:
            fh.write("label," + ",".join(f"pixel_{i}" for i in range(64)) + "\n")
            for lbl, row in zip(labels, rows):
                fh.write(str(int(lbl)) + "," + ",".join(str(int(v)) for v in row) + "\n")
        config = small_config(
            dataset="small-digits", data_csv=str(path), depth=2, width=16,
            epochs=30, lr=0.1, batch=16, input_dim=64, n_classes=3, seed=2,
        )
        report = train(config)
        assert not report.diverged
        assert report.test_accuracy >= 0.9


class TestTraining:
    def test_linearly_separable_sanity(self):
        """A two-affine-layer net on blob data reaches 95 percent."""
        config = small_config(
            depth=2, width=8, epochs=50, lr=0.1, batch=16,
            n_samples=400, input_dim=8, n_classes=2, seed=0,
        )
        report = train(config)
        assert not report.diverged
        assert report.test_accuracy >= 0.95

    def test_initial_sparsity_matches_target(self):
        init = solve_init("crelu", 0.85, 1.0, 0.7)
        config = small_config(
            init=init, depth=30, width=64, epochs=1, lr=1e-3, batch=64,
            n_samples=512, input_dim=64, n_classes=10, seed=1,
        )
        report = train(config)
        assert report.sparsity_at_init == pytest.approx(0.85, abs=0.02)

    def test_divergence_sets_flag_not_exception(self):
        # clipped activations bound the forward pass, so a guaranteed
        # blow-up needs the unbounded family
        from eoc_lab.solver import relu_init

        config = small_config(
            init=relu_init(1.0), depth=6, width=16, epochs=5, lr=1e6, batch=16,
            n_samples=128, input_dim=8, n_classes=3,
        )
        report = train(config)
        assert report.diverged
        assert report.epochs_run >= 1
        assert math.isnan(report.train_losses[-1])
        assert report.test_accuracy is None

    def test_deterministic_given_seed(self):
        config = small_config(epochs=3)
        a, b = train(config), train(config)
        assert a.train_losses == b.train_losses
        assert a.val_accuracies == b.val_accuracies
        assert a.test_accuracy == b.test_accuracy

    def test_steps_to_loss(self):
        config = small_config(depth=2, width=8, epochs=30, lr=0.1, batch=16,
                              n_samples=200, input_dim=8, n_classes=2, seed=1)
        report = train(config)
        steps = report.steps_to_loss(1.0)
        assert steps is not None
        assert steps % report.steps_per_epoch == 0
        assert report.steps_to_loss(-1.0) is None

    def test_training_log_schema(self, tmp_path):
        config = small_config(epochs=2)
        report = train(config)
        path = tmp_path / "log.csv"
        write_training_log(report, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,step,loss,val_acc,sparsity"
        assert len(lines) == 1 + len(report.step_log)

    def test_observed_sparsity_covers_every_activated_layer(self):
        config = small_config(depth=2, width=64, input_dim=64, n_samples=256)
        params = init_params(config)
        x, _ = make_blobs(0, 256, config.input_dim, config.n_classes)
        sp = observed_sparsity(
            params, config.init.spec, normalize_inputs(x, config.init.q_star)
        )
        assert sp == pytest.approx(config.init.s, abs=0.03)
