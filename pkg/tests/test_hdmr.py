import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rshdmr import datasets as ds
from rshdmr.errors import ConditioningError, InputError
from rshdmr.gpr import KernelParams, gpr_fit, predict_mean, predict_variance
from rshdmr.hdmr import (
    TrainingSchedule,
    component_outputs,
    hdmr_predict,
    hdmr_predict_std,
    hdmr_train,
    load_model,
    rmse,
    save_model,
    scale_factor,
)
from rshdmr.projection import build_all_pairs, build_full, build_one_d, parse_matrices

from conftest import KERNEL, SCHEDULE


class TestScaleFactor:
    def test_examples(self):
        sch = TrainingSchedule(50, 0.1, 1.0)
        assert scale_factor(0, sch) == pytest.approx(0.1, rel=1e-15)
        assert scale_factor(10, sch) == pytest.approx(0.28, rel=1e-12)
        assert scale_factor(49, sch) == pytest.approx(0.1 + 0.9 * 49 / 50, rel=1e-12)
        assert scale_factor(30, TrainingSchedule(50, 0.1, 2.0)) == 1.0

    def test_unit_start_is_constant(self):
        sch = TrainingSchedule(7, 1.0, 3.0)
        assert [scale_factor(c, sch) for c in range(7)] == [1.0] * 7

    @given(st.integers(1, 200), st.floats(0.01, 1.0), st.floats(0.01, 10.0))
    def test_bounded_and_monotone(self, C, s, e):
        sch = TrainingSchedule(C, s, e)
        a = [scale_factor(c, sch) for c in range(C)]
        assert a[0] == pytest.approx(s)
        assert all(s - 1e-15 <= v <= 1.0 for v in a)
        assert all(x <= y for x, y in zip(a, a[1:]))

    @pytest.mark.parametrize("kw", [dict(cycles=0), dict(scale_start=0.0), dict(scale_start=1.5),
                                    dict(scale_rate=0.0), dict(cycles=2.5)])
    def test_bad_schedule(self, kw):
        with pytest.raises(InputError):
            TrainingSchedule(**kw)

    def test_cycle_out_of_range(self):
        with pytest.raises(InputError):
            scale_factor(50, TrainingSchedule())


class TestRmse:
    def test_examples(self):
        assert rmse([1, 2, 3], [1, 2, 3]) == 0.0
        assert rmse([0, 0], [3, 4]) == pytest.approx(np.sqrt(12.5))

    def test_errors(self):
        with pytest.raises(InputError):
            rmse([1, 2], [1])
        with pytest.raises(InputError):
            rmse([], [])


def _coupled(n=60, seed=3):
    d = ds.gen_coupled(n, seed)
    return d.X, d.y


class TestTraining:
    def test_single_component_matches_plain_gp(self):
        X, y = _coupled(80)
        Xq = np.random.default_rng(1).random((50, 3))
        model, _ = hdmr_train((X, y), build_full(3), KERNEL, TrainingSchedule(cycles=3))
        plain = gpr_fit(X, y, KERNEL)
        np.testing.assert_allclose(hdmr_predict(model, Xq), predict_mean(plain, Xq), atol=1e-10, rtol=0)
        np.testing.assert_allclose(hdmr_predict_std(model, Xq) ** 2, predict_variance(plain, Xq),
                                   atol=1e-10, rtol=0)

    def test_residual_identity(self):
        X, y = _coupled(50)
        seen = []

        def cb(c, i, target, others, a):
            seen.append((c, i, a))
            np.testing.assert_allclose(target + others, y, atol=1e-12, rtol=0)

        sch = TrainingSchedule(4, 0.1, 1.0)
        hdmr_train((X, y), build_one_d(3), KERNEL, sch, callback=cb)
        assert [(c, i) for c, i, _ in seen] == [(c, i) for c in range(4) for i in range(3)]
        assert [a for _, _, a in seen[::3]] == [scale_factor(c, sch) for c in range(4)]

    def test_first_target_from_initial_outputs(self):
        X, y = _coupled(30)
        first = {}

        def cb(c, i, target, others, a):
            if c == 0 and i == 0:
                first["t"] = target.copy()

        hdmr_train((X, y), build_one_d(3), KERNEL, TrainingSchedule(1, 0.1), callback=cb)
        np.testing.assert_allclose(first["t"], y - 0.1 * 2 * y / 3, rtol=1e-14)

    def test_additive_recovery(self, additive_data, additive_model):
        additive_model, _ = additive_model
        assert rmse(hdmr_predict(additive_model, additive_data.X), additive_data.y) <= 0.01

    def test_component_outputs_sum(self, additive_data, additive_model):
        additive_model, _ = additive_model
        X = additive_data.X[:500]
        parts = component_outputs(additive_model, X)
        assert parts.shape == (500, 3)
        np.testing.assert_allclose(parts.sum(axis=1), hdmr_predict(additive_model, X), atol=1e-12, rtol=0)

    def test_components_are_linear(self, additive_data, additive_model):
        additive_model, _ = additive_model
        X = additive_data.X[:1000]
        parts = component_outputs(additive_model, X)
        for i in range(3):
            r = np.corrcoef(X[:, i], parts[:, i])[0, 1]
            assert r ** 2 >= 0.999

    def test_target_scaling(self):
        X, y = _coupled(40)
        Xq = np.random.default_rng(2).random((20, 3))
        base, _ = hdmr_train((X, y), build_one_d(3), KERNEL, TrainingSchedule(10, 0.1, 2.0))
        scaled, _ = hdmr_train((X, 3.5 * y), build_one_d(3), KERNEL, TrainingSchedule(10, 0.1, 2.0))
        np.testing.assert_allclose(hdmr_predict(scaled, Xq), 3.5 * hdmr_predict(base, Xq),
                                   rtol=1e-8, atol=1e-10)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_row_permutation_invariance(self, seed):
        X, y = _coupled(40, seed % 50)
        perm = np.random.default_rng(seed).permutation(len(y))
        Xq = np.random.default_rng(seed + 1).random((10, 3))
        sch = TrainingSchedule(8, 0.1, 2.0)
        # moderate noise: at 1e-10 the reordered factorization alone moves predictions ~1e-6
        kernel = KernelParams(0.6, 1e-6)
        a, _ = hdmr_train((X, y), build_one_d(3), kernel, sch)
        b, _ = hdmr_train((X[perm], y[perm]), build_one_d(3), kernel, sch)
        np.testing.assert_allclose(hdmr_predict(a, Xq), hdmr_predict(b, Xq), atol=1e-8, rtol=0)

    def test_history_length_and_report(self):
        X, y = _coupled(40)
        model, report = hdmr_train((X, y), build_all_pairs(3), KERNEL, TrainingSchedule(6))
        assert len(report.history) == 6 == len(model.train_rmse_history)
        assert report.rmse_train == report.history[-1]
        assert [c["label"] for c in report.components] == [A.label for A in model.matrices]

    def test_raw_metrics(self):
        raw = ds.Dataset(["a", "b", "y"], *(lambda r: (r[:, :2] * 10, r[:, 2] * 100))(
            np.random.default_rng(0).random((40, 3))))
        data, scaler = ds.minmax_scale(raw)
        _, report = hdmr_train(data, build_one_d(2), KERNEL, TrainingSchedule(5), eval_data=data)
        assert report.rmse_train_raw == pytest.approx(report.rmse_train * scaler.y_range)
        assert report.rmse_eval_raw == pytest.approx(report.rmse_eval * scaler.y_range)


class TestErrors:
    def test_mismatched_rows(self):
        X, y = _coupled(10)
        with pytest.raises(InputError, match="rows"):
            hdmr_train((X, y), build_one_d(4), KERNEL)

    def test_missing_values(self):
        X, y = _coupled(10)
        X[0, 0] = np.nan
        with pytest.raises(InputError, match="missing"):
            hdmr_train((X, y), build_one_d(3), KERNEL)

    def test_empty_matrix_list(self):
        X, y = _coupled(10)
        with pytest.raises(InputError):
            hdmr_train((X, y), [], KERNEL)

    def test_duplicate_inputs_rescued_by_jitter(self):
        X, y = _coupled(10)
        X[:, 1] = 0.5
        model, _ = hdmr_train((X, y), build_one_d(3), KernelParams(0.6, 0.0), TrainingSchedule(2))
        assert model.gprs[1].jitter > 0

    def test_conditioning_error_names_component(self, monkeypatch):
        import rshdmr.hdmr as hdmr_mod
        real = hdmr_mod.factorize

        def failing(K, noise):
            if K.shape[0] and np.all(K == 1.0):
                raise ConditioningError("forced", jitter=1e-6)
            return real(K, noise)

        monkeypatch.setattr(hdmr_mod, "factorize", failing)
        X, y = _coupled(10)
        X[:, 1] = 0.5
        with pytest.raises(ConditioningError) as info:
            hdmr_train((X, y), build_one_d(3), KERNEL, TrainingSchedule(2))
        assert info.value.component == 1 and info.value.cycle == 0

    def test_non_finite_target(self):
        X, y = _coupled(10)
        y[0] = np.inf
        with pytest.raises(InputError, match="finite"):
            hdmr_train((X, y), build_one_d(3), KERNEL, TrainingSchedule(2))

    def test_query_shape(self, additive_model):
        additive_model, _ = additive_model
        with pytest.raises(InputError):
            hdmr_predict(additive_model, np.zeros((2, 4)))
        with pytest.raises(InputError):
            hdmr_predict(additive_model, [[np.nan, 0.1, 0.2]])


class TestPersistence:
    def test_round_trip_bit_identical(self, tmp_path):
        X, y = _coupled(40)
        matrices = parse_matrices("[[1,0],[0,1],[0,1]]; [[0.5],[0.5],[0]]", 3)
        model, _ = hdmr_train((X, y), matrices, KERNEL, TrainingSchedule(5))
        save_model(model, tmp_path / "m.npz")
        back = load_model(tmp_path / "m.npz")
        Xq = np.random.default_rng(9).random((30, 3))
        np.testing.assert_array_equal(hdmr_predict(back, Xq), hdmr_predict(model, Xq))
        np.testing.assert_array_equal(hdmr_predict_std(back, Xq), hdmr_predict_std(model, Xq))
        assert back.matrices == model.matrices
        assert back.schedule == model.schedule
        np.testing.assert_array_equal(back.train_rmse_history, model.train_rmse_history)

    def test_scaler_survives(self, tmp_path):
        raw = ds.gen_additive(30, 2, 0)
        data, scaler = ds.minmax_scale(raw)
        model, _ = hdmr_train(data, build_one_d(2), KERNEL, TrainingSchedule(2))
        save_model(model, tmp_path / "m.npz")
        back = load_model(tmp_path / "m.npz")
        assert back.scaler.to_dict() == scaler.to_dict()
        assert back.column_names == data.column_names

    def test_garbage_file(self, tmp_path):
        p = tmp_path / "junk.npz"
        p.write_bytes(b"not a model")
        with pytest.raises(InputError):
            load_model(p)
