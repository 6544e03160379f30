import numpy as np
import pytest

from gflin.errors import ConfigError, DataError, NumericalError
from gflin.filters import FilterConfig
from gflin.solver import (
    DEFAULT_LAMBDA_GRID,
    KernelSpec,
    check_scale_invariance,
    fit,
    fit_primal_linear,
    kernel_matrix,
    load_model,
    predict,
    save_model,
    select_lambda,
)


def random_instance(rng, n=None, f=None, c=None):
    n = n or int(rng.integers(3, 51))
    f = f or int(rng.integers(1, 11))
    c = c or int(rng.integers(2, 5))
    F = rng.normal(size=(n, f))
    labels = rng.integers(0, c, size=n).tolist()
    while len(set(labels)) < 2:  # degenerate single-class draws are uninformative
        labels = rng.integers(0, c, size=n).tolist()
    return F, labels


class TestKernelMatrix:
    def test_orthonormal_rows(self):
        np.testing.assert_array_equal(kernel_matrix(np.eye(2), np.eye(2)), np.eye(2))

    def test_single_dot_product(self):
        np.testing.assert_array_equal(kernel_matrix([[1.0, 2.0]], [[3.0, 4.0]]), [[11.0]])

    def test_symmetric_psd(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(4, 3))
        m = kernel_matrix(a, a)
        np.testing.assert_allclose(m, m.T, atol=1e-14)
        assert np.linalg.eigvalsh(m).min() >= -1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(DataError):
            kernel_matrix(np.zeros((2, 3)), np.zeros((2, 4)))

    def test_unknown_kernel_kind(self):
        with pytest.raises(ConfigError):
            KernelSpec("rbf")


class TestFit:
    def test_orthonormal_rows_halve_targets(self):
        # (I + I)^-1 Y = Y / 2
        model = fit(np.eye(2), [0, 1], lam=1.0)
        np.testing.assert_allclose(model.dual_coef, np.eye(2) / 2.0, atol=1e-14)

    def test_matches_dense_inverse_oracle(self):
        rng = np.random.default_rng(1)
        F = rng.normal(size=(3, 4))
        labels = [0, 1, 0]
        lam = 0.5
        model = fit(F, labels, lam)
        M = F @ F.T
        Y = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        oracle = np.linalg.inv(lam * M + np.eye(3)) @ Y
        assert np.abs(model.dual_coef - oracle).max() < 1e-10

    def test_defining_equation_residual(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            F, labels = random_instance(rng)
            lam = float(10.0 ** rng.integers(-4, 5))
            model = fit(F, labels, lam)
            classes = sorted(set(labels))
            Y = np.zeros((len(labels), len(classes)))
            Y[np.arange(len(labels)), [classes.index(y) for y in labels]] = 1.0
            system = lam * (F @ F.T) + np.eye(len(labels))
            residual = np.linalg.norm(system @ model.dual_coef - Y) / np.linalg.norm(Y)
            assert residual < 1e-8

    def test_seed_independence_bit_for_bit(self):
        rng = np.random.default_rng(3)
        F, labels = random_instance(rng, n=20)
        np.random.seed(123)
        a = fit(F, labels, 2.0)
        np.random.seed(987)
        b = fit(F, labels, 2.0)
        assert a.dual_coef.tobytes() == b.dual_coef.tobytes()

    def test_system_matrix_spd_floor(self):
        rng = np.random.default_rng(4)
        F = rng.normal(size=(15, 3))
        lam = 10.0
        system = lam * (F @ F.T) + np.eye(15)
        assert np.linalg.eigvalsh(system).min() >= 1.0 - 1e-9

    def test_non_positive_lambda(self):
        with pytest.raises(ConfigError):
            fit(np.eye(2), [0, 1], lam=0.0)

    def test_train_cap(self):
        with pytest.raises(ConfigError, match="cap"):
            fit(np.zeros((5, 2)), [0, 1, 0, 1, 0], lam=1.0, train_cap=4)

    def test_label_count_mismatch(self):
        with pytest.raises(DataError):
            fit(np.eye(3), [0, 1], lam=1.0)


class TestPredict:
    def test_interpolation_regime(self):
        # distinct rows + huge lam -> the fit reproduces the training labels
        rng = np.random.default_rng(5)
        F = rng.normal(size=(4, 3)) * 2.0
        labels = [0, 1, 1, 0]
        model = fit(F, labels, lam=1e4)
        _, pred = predict(model, F)
        assert pred == labels

    def test_empty_query(self):
        model = fit(np.eye(2), [0, 1], lam=1.0)
        scores, pred = predict(model, np.zeros((0, 2)))
        assert scores.shape == (0, 2)
        assert pred == []

    def test_orthonormal_fixture_scores(self):
        model = fit(np.eye(2), [0, 1], lam=1.0)
        scores, pred = predict(model, np.eye(2))
        np.testing.assert_allclose(scores, np.eye(2) / 2.0, atol=1e-14)
        assert pred == [0, 1]

    def test_argmax_tie_goes_to_lowest_class(self):
        model = fit(np.eye(2), [0, 1], lam=1.0)
        scores, pred = predict(model, np.zeros((1, 2)))
        assert scores[0, 0] == scores[0, 1] == 0.0
        assert pred == [0]

    def test_dimension_mismatch(self):
        model = fit(np.eye(2), [0, 1], lam=1.0)
        with pytest.raises(DataError):
            predict(model, np.zeros((1, 3)))


class TestPrimal:
    def test_identity_fixture(self):
        W = fit_primal_linear(np.eye(2), [0, 1], xi=1.0)
        np.testing.assert_allclose(W, np.eye(2) / 2.0, atol=1e-14)

    def test_matches_normal_equation_oracle(self):
        rng = np.random.default_rng(6)
        F = rng.normal(size=(5, 3))
        labels = [0, 1, 2, 1, 0]
        xi = 0.8
        W = fit_primal_linear(F, labels, xi)
        Y = np.zeros((5, 3))
        Y[np.arange(5), labels] = 1.0
        oracle = np.linalg.inv(F.T @ F + xi * np.eye(3)) @ F.T @ Y
        assert np.abs(W - oracle).max() < 1e-10

    def test_dual_primal_agreement(self):
        rng = np.random.default_rng(7)
        F, labels = random_instance(rng, n=12, f=4, c=3)
        xi = 0.35
        W = fit_primal_linear(F, labels, xi)
        model = fit(F, labels, lam=1.0 / xi)
        queries = rng.normal(size=(6, 4))
        dual_scores, _ = predict(model, queries)
        assert np.abs(dual_scores - queries @ W).max() < 1e-8

    def test_non_positive_xi(self):
        with pytest.raises(ConfigError):
            fit_primal_linear(np.eye(2), [0, 1], xi=-1.0)


class TestScaleInvariance:
    def test_beta_one_is_exactly_zero(self):
        rng = np.random.default_rng(8)
        F, labels = random_instance(rng, n=8, f=3, c=2)
        assert check_scale_invariance(F, labels, xi=0.5, beta=1.0) == 0.0

    def test_beta_ten(self):
        rng = np.random.default_rng(9)
        F, labels = random_instance(rng, n=6, f=3, c=2)
        assert check_scale_invariance(F, labels, xi=0.5, beta=10.0) < 1e-8

    def test_beta_small(self):
        rng = np.random.default_rng(10)
        F, labels = random_instance(rng, n=6, f=3, c=2)
        assert check_scale_invariance(F, labels, xi=2.0, beta=1e-3) < 1e-8

    def test_beta_zero_rejected(self):
        with pytest.raises(ConfigError):
            check_scale_invariance(np.eye(2), [0, 1], xi=1.0, beta=0.0)

    def test_argmax_labels_unchanged_across_scales(self):
        rng = np.random.default_rng(11)
        F, labels = random_instance(rng, n=20, f=5, c=3)
        xi = 0.7
        _, base = predict(fit(F, labels, 1.0 / xi), F)
        for beta in (1e-3, 1.0, 10.0, 1e3):
            _, scaled = predict(fit(beta * F, labels, 1.0 / (beta * beta * xi)), beta * F)
            assert scaled == base


class TestSignedBinary:
    def test_single_column_and_sign_decision(self):
        rng = np.random.default_rng(12)
        F = rng.normal(size=(6, 3))
        labels = [0, 1, 0, 1, 1, 0]
        model = fit(F, labels, lam=1e4, encoding="signed_binary")
        assert model.dual_coef.shape == (6, 1)
        scores, pred = predict(model, F)
        assert scores.shape == (6, 1)
        assert pred == labels

    def test_requires_two_classes(self):
        with pytest.raises(ConfigError):
            fit(np.eye(3), [0, 1, 2], lam=1.0, encoding="signed_binary")

    def test_zero_score_maps_to_lower_class(self):
        model = fit(np.eye(2), [0, 1], lam=1.0, encoding="signed_binary")
        _, pred = predict(model, np.zeros((1, 2)))
        assert pred == [0]


class TestSelectLambda:
    def test_grid_shape(self):
        assert len(DEFAULT_LAMBDA_GRID) == 9
        assert DEFAULT_LAMBDA_GRID[0] == 1e-4
        assert DEFAULT_LAMBDA_GRID[-1] == 1e4

    def test_picks_best_validation_accuracy(self):
        rng = np.random.default_rng(13)
        F = np.vstack([rng.normal(size=(10, 2)) + 4.0, rng.normal(size=(10, 2)) - 4.0])
        labels = [0] * 10 + [1] * 10
        best_lam, best_acc, scores = select_lambda(F[:10], labels[:10], F[10:], labels[10:], grid=(1e-2, 1.0))
        assert best_lam in (1e-2, 1.0)
        assert best_acc == max(acc for _, acc in scores)

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError):
            select_lambda(np.eye(2), [0, 1], np.eye(2), [0, 1], grid=())


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        F, labels = random_instance(rng, n=9, f=4, c=3)
        config = FilterConfig("ssgc", 8, tau=0.05)
        model = fit(F, labels, lam=3.0)
        path = tmp_path / "model.bin"
        save_model(model, path, labels, config)
        loaded, loaded_config = load_model(path)
        assert loaded.lam == model.lam
        assert loaded.classes == model.classes
        assert loaded.encoding == model.encoding
        assert loaded_config == config
        np.testing.assert_array_equal(loaded.dual_coef, model.dual_coef)
        np.testing.assert_array_equal(loaded.train_filter, model.train_filter)

    def test_round_trip_without_filter_config(self, tmp_path):
        model = fit(np.eye(2), [0, 1], lam=1.0)
        path = tmp_path / "model.bin"
        save_model(model, path, [0, 1])
        _, config = load_model(path)
        assert config is None

    def test_not_a_model_file(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"?" * 64)
        with pytest.raises(DataError, match="not a model file"):
            load_model(path)

    def test_tampered_body_fails_residual_check(self, tmp_path):
        rng = np.random.default_rng(15)
        F, labels = random_instance(rng, n=6, f=3, c=2)
        model = fit(F, labels, lam=2.0)
        path = tmp_path / "model.bin"
        save_model(model, path, labels)
        blob = bytearray(path.read_bytes())
        blob[-8:] = b"\x00" * 7 + b"\x55"  # corrupt the last train_filter value
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="defining equation"):
            load_model(path)
