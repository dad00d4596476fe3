import numpy as np
import pytest

import capsvm.harness as harness
from capsvm import CDConfig, ConfigError, GridSpec, run_cv
from capsvm.data import make_folds, split_cv, standardize
from capsvm.harness import (
    BaselineRow,
    CVReport,
    FoldResult,
    benchmark_table,
    default_grid,
    parse_baseline_csv,
    parse_report_csv,
    report_to_csv,
)
from capsvm.kernels import build_stack, cross_gram, parse_kernel_specs
from capsvm.complexity import build_penalties
from capsvm.cd_solver import train_cd
from conftest import blob_dataset

SMALL_GRID = dict(lambdas=(0.1, 0.001), betas=(0.01,), kernels="linear rbf:0.5")


class TestRunCv:
    def test_separable_blobs(self):
        data = blob_dataset(1, m=100, n=5, separation=3.0)
        grid = GridSpec(penalty_mode="trace", solver="cd", seed=42, **SMALL_GRID)
        report = run_cv(data, grid, num_folds=5, cd_config=CDConfig(tol=1e-4))
        assert report.mean_error <= 2.0

    def test_single_grid_point_equals_direct_run(self):
        data = blob_dataset(2, m=60, n=4, separation=2.0)
        lam, beta = 0.01, 0.001
        grid = GridSpec(lambdas=(lam,), betas=(beta,), kernels="linear rbf:0.5",
                        penalty_mode="trace", solver="cd", seed=7)
        config = CDConfig(tol=1e-5)
        report = run_cv(data, grid, num_folds=5, cd_config=config)

        specs = parse_kernel_specs(grid.kernels)
        folds = make_folds(data.num_examples, 5, seed=7)
        for fr in report.folds:
            tr, va, te = split_cv(folds, fr.fold)
            train, (test,), _ = standardize(data.subset(tr), [data.subset(te)])
            stack = build_stack(specs, train)
            pen = build_penalties(stack, "trace", lam, beta)
            coefs, _ = train_cd(stack, train.labels, pen, config)
            alpha = np.where(np.abs(coefs.alpha) > harness.PRUNE_TOL, coefs.alpha, 0.0)
            cross = np.stack([cross_gram(s, train.features, test) for s in stack.specs])
            raw = np.einsum("kqj,kj->q", cross, alpha * train.labels[None, :])
            err = 100.0 * float((np.where(raw >= 0, 1.0, -1.0) != test.labels).mean())
            assert fr.test_error_pct == pytest.approx(err, abs=1e-12)
            assert fr.lam == lam and fr.beta == beta

    def test_protocol_fidelity(self, monkeypatch):
        data = blob_dataset(3, m=50, n=3)
        audited = []
        original = harness._prepare_fold

        def audit(dataset, specs, mode, tr, va, te):
            audited.append((tr.copy(), va.copy(), te.copy()))
            return original(dataset, specs, mode, tr, va, te)

        monkeypatch.setattr(harness, "_prepare_fold", audit)
        grid = GridSpec(lambdas=(0.1,), betas=(0.01,), kernels="linear",
                        penalty_mode="trace", seed=11)
        run_cv(data, grid, num_folds=5, cd_config=CDConfig(tol=1e-4))
        folds = make_folds(50, 5, seed=11)
        assert len(audited) == 5
        for i, (tr, va, te) in enumerate(audited):
            e_tr, e_va, e_te = split_cv(folds, i)
            np.testing.assert_array_equal(te, e_te)
            np.testing.assert_array_equal(va, e_va)
            np.testing.assert_array_equal(tr, e_tr)

    def test_reproducible_report_csv(self):
        data = blob_dataset(4, m=60, n=4)
        grid = GridSpec(penalty_mode="trace", seed=5, **SMALL_GRID)
        config = CDConfig(tol=1e-4)
        a = report_to_csv(run_cv(data, grid, 5, cd_config=config), "blobs", "cd", True)
        b = report_to_csv(run_cv(data, grid, 5, cd_config=config), "blobs", "cd", True)
        assert a == b

    def test_lp_solver_route(self):
        data = blob_dataset(5, m=40, n=3)
        grid = GridSpec(lambdas=(0.01,), betas=(0.01,), kernels="linear",
                        penalty_mode="trace", solver="lp", seed=1)
        report = run_cv(data, grid, num_folds=5)
        assert 0.0 <= report.mean_error <= 100.0

    def test_selection_tie_break(self):
        # two identical (degenerate) grid points: the smaller lambda must win
        data = blob_dataset(6, m=50, n=3)
        grid = GridSpec(lambdas=(1e3, 1e4), betas=(1e3,), kernels="linear",
                        penalty_mode="trace", seed=2)
        report = run_cv(data, grid, 5, cd_config=CDConfig(tol=1e-4))
        assert report.chosen[0] == 1e3

    def test_default_grid_matches_protocol(self):
        grid = default_grid()
        assert grid.lambdas == tuple(10.0 ** -i for i in range(7))
        assert grid.betas == grid.lambdas

    def test_grid_validation(self):
        with pytest.raises(ConfigError):
            GridSpec(lambdas=(), betas=(0.1,))
        with pytest.raises(ConfigError):
            GridSpec(lambdas=(0.1,), betas=(0.1,), solver="qp")
        with pytest.raises(ConfigError):
            GridSpec(lambdas=(0.1,), betas=(0.1,), penalty_mode="local")


class TestReportCsv:
    def _report(self):
        folds = [FoldResult(i, 0.1, 0.01, None, 5.0 + i, 10 + i, 0.5) for i in range(5)]
        return CVReport.from_folds(folds, (0.1, 0.01, None))

    def test_round_trip(self):
        text = report_to_csv(self._report(), "iono", "cd")
        grouped = parse_report_csv(text)
        folds = grouped[("iono", "cd")]
        assert len(folds) == 5
        assert folds[2].test_error_pct == 7.0

    def test_stats_recomputable(self):
        rep = self._report()
        errs = np.array([f.test_error_pct for f in rep.folds])
        assert rep.mean_error == pytest.approx(errs.mean())
        assert rep.std_error == pytest.approx(errs.std(ddof=1))

    def test_zero_timing_column(self):
        text = report_to_csv(self._report(), "iono", "cd", zero_timing=True)
        for line in text.strip().splitlines()[1:]:
            assert line.endswith(",0.0")


class TestBenchmarkTable:
    def _reports(self):
        folds = [FoldResult(i, 0.1, 0.01, None, 4.0, 30, 0.0) for i in range(5)]
        return [("ionosphere", CVReport.from_folds(folds, (0.1, 0.01, None)))]

    def test_two_methods_column_groups(self):
        reports = self._reports() * 2
        table, csv_twin = benchmark_table(reports, method_names=["cap-c", "cap-2"])
        header = table.splitlines()[0]
        assert header.count("err%") == 2 and header.count("#SV") == 2
        assert "cap-c" in header and "cap-2" in header
        assert csv_twin.splitlines()[0] == "dataset,method,error_mean,error_stdev,svs_mean,svs_stdev"

    def test_external_baseline_row(self):
        external = parse_baseline_csv("ionosphere,6.54,3.07,152.0,5.5\n")
        assert external == [BaselineRow("ionosphere", "L2-SVM", 6.54, 3.07, 152.0, 5.5)]
        table, csv_twin = benchmark_table(self._reports(), external,
                                          method_names=["this work"])
        assert "L2-SVM" in table
        assert "6.54 (3.07)" in table
        assert "152.0 (5.5)" in table
        assert "ionosphere,L2-SVM,6.54,3.07,152.0,5.5" in csv_twin

    def test_named_external_rows(self):
        rows = parse_baseline_csv("iono,L1-SVM,7.12,3.18,73.8,4.9\n")
        assert rows[0].method == "L1-SVM"

    def test_empty_external(self):
        table, _ = benchmark_table(self._reports(), [], method_names=["this work"])
        assert "L2-SVM" not in table

    def test_duplicate_rejected(self):
        reports = self._reports() * 2
        with pytest.raises(ConfigError):
            benchmark_table(reports, method_names=["same", "same"])


class TestLpCap:
    def test_oversized_lp_grid_raises_harness_error(self):
        # 10 families x 200 points would need 4200 LP variables (cap 2500):
        # every grid point fails, which must surface as a harness error
        import warnings
        data = blob_dataset(8, m=200, n=4)
        grid = GridSpec(lambdas=(0.1,), betas=(0.01,), kernels="poly:1-10",
                        penalty_mode="trace", solver="lp", seed=3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(harness.HarnessError):
                run_cv(data, grid, num_folds=5)
