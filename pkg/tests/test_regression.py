import numpy as np
import pytest

from stylematch.metrics import RecordRow
from stylematch.regression import (
    DesignMatrix,
    RankDeficiencyError,
    RegressionError,
    block_f_test,
    build_design,
    describe_lsm,
    diagnostics,
    dummy_encode,
    model_suite,
    ols_fit,
    quadratic_model,
    summarize_variable,
    vif,
)


def _design(X, names=None, y=None):
    X = np.asarray(X, dtype=float)
    names = names or ["intercept"] + [f"x{j}" for j in range(1, X.shape[1])]
    rows = [f"r{i}" for i in range(X.shape[0])]
    return DesignMatrix(X=X, columns=names, rows=rows, y=y)


def normal_equations_fit(X, y):
    """Independent oracle: textbook normal equations beta = (X'X)^-1 X'y."""
    xtx = X.T @ X
    beta = np.linalg.solve(xtx, X.T @ y)
    resid = y - X @ beta
    n, p = X.shape
    sigma2 = float(resid @ resid) / (n - p)
    se = np.sqrt(sigma2 * np.diag(np.linalg.inv(xtx)))
    return beta, se


class TestDummyEncode:
    def test_frequency_reference(self):
        values = ["rust"] * 5 + ["go"] * 3 + ["c"] * 2
        names, cols = dummy_encode(values, "lang")
        assert names == ["lang[go]", "lang[c]"]
        assert cols.shape == (10, 2)
        assert cols[:5].sum() == 0  # reference rows all zero

    def test_binary(self):
        names, cols = dummy_encode(["true", "false", "false", "true"], "sponsor")
        assert len(names) == 1
        assert cols.shape == (4, 1)

    def test_single_level_warns(self, caplog):
        names, cols = dummy_encode(["only"] * 4, "domain")
        assert names == [] and cols.shape == (4, 0)

    def test_tie_broken_lexicographically(self):
        names, _ = dummy_encode(["b", "a", "b", "a"], "x")
        assert names == ["x[b]"]  # 'a' wins the tie as reference


class TestOlsFit:
    def test_exact_line(self):
        x = np.arange(5, dtype=float)
        X = np.column_stack([np.ones(5), x])
        y = 1.0 + 2.0 * x
        fit = ols_fit(_design(X), y)
        assert fit.beta == pytest.approx([1.0, 2.0], abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0)

    def test_constant_outcome(self):
        rng = np.random.default_rng(0)
        X = np.column_stack([np.ones(10), rng.normal(size=10)])
        y = np.full(10, 3.5)
        fit = ols_fit(_design(X), y)
        assert fit.beta[0] == pytest.approx(3.5, abs=1e-10)
        assert fit.beta[1] == pytest.approx(0.0, abs=1e-10)
        assert fit.r_squared == pytest.approx(0.0, abs=1e-12)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(42)
        X = np.column_stack([np.ones(200), rng.normal(size=(200, 9))])
        y = rng.normal(size=200)
        fit = ols_fit(_design(X), y)
        beta_oracle, se_oracle = normal_equations_fit(X, y)
        rel = np.abs(fit.beta - beta_oracle) / np.maximum(np.abs(beta_oracle), 1e-12)
        assert rel.max() < 1e-8
        assert fit.std_errors == pytest.approx(se_oracle, rel=1e-8)

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(1)
        X = np.column_stack([np.ones(50), rng.normal(size=(50, 3))])
        y = rng.normal(size=50)
        fit = ols_fit(_design(X), y)
        assert np.abs(X.T @ fit.residuals).max() < 1e-8 * np.linalg.norm(y)

    def test_rank_deficiency_names_columns(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=30)
        X = np.column_stack([np.ones(30), x, 2 * x])
        with pytest.raises(RankDeficiencyError) as exc:
            ols_fit(_design(X, ["intercept", "a", "b"]), rng.normal(size=30))
        assert set(exc.value.columns) & {"a", "b"}

    def test_too_few_rows(self):
        X = np.ones((3, 3))
        with pytest.raises(RegressionError):
            ols_fit(_design(X), np.zeros(3))


class TestVif:
    def test_orthogonal_is_one(self):
        # orthonormal basis whose first column is the constant direction:
        # remaining columns are exactly orthogonal to the intercept
        rng = np.random.default_rng(3)
        q, _ = np.linalg.qr(np.column_stack([np.ones(40), rng.normal(size=(40, 3))]))
        X = np.column_stack([np.ones(40), q[:, 1:]])
        values = vif(_design(X))
        assert all(abs(v - 1.0) < 1e-9 for v in values.values())

    def test_collinear_flagged(self):
        rng = np.random.default_rng(4)
        x1 = rng.normal(size=60)
        x2 = x1 + rng.normal(scale=1e-3, size=60)
        X = np.column_stack([np.ones(60), x1, x2])
        values = vif(_design(X, ["intercept", "x1", "x2"]))
        assert values["x1"] > 5 and values["x2"] > 5

    def test_single_predictor(self):
        rng = np.random.default_rng(5)
        X = np.column_stack([np.ones(30), rng.normal(size=30)])
        (value,) = vif(_design(X)).values()
        assert value == pytest.approx(1.0, abs=1e-9)


class TestDiagnostics:
    def test_hat_trace_and_uniform_leverage(self):
        # balanced orthogonal design: +/-1 pattern has equal leverage
        X = np.column_stack([np.ones(8), np.tile([1, -1], 4), np.repeat([1, -1], 4)])
        y = np.arange(8, dtype=float)
        design = _design(X)
        fit = ols_fit(design, y)
        report = diagnostics(fit, design)
        assert report.leverage.sum() == pytest.approx(3.0, abs=1e-9)
        assert np.allclose(report.leverage, 3 / 8)
        assert report.leverage_flagged == []

    def test_extreme_row_flagged(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=40)
        x[0] = 40.0
        X = np.column_stack([np.ones(40), x])
        design = _design(X)
        fit = ols_fit(design, rng.normal(size=40))
        report = diagnostics(fit, design)
        assert 0 in report.leverage_flagged

    def test_symmetric_residual_skewness_small(self):
        rng = np.random.default_rng(7)
        skews = []
        for _ in range(30):
            X = np.column_stack([np.ones(100), rng.normal(size=100)])
            y = rng.normal(size=100)
            design = _design(X)
            fit = ols_fit(design, y)
            skews.append(diagnostics(fit, design).skewness)
        assert abs(np.mean(skews)) < 0.2  # Monte Carlo sanity, not strict

    def test_qq_and_bp_fields(self):
        rng = np.random.default_rng(8)
        X = np.column_stack([np.ones(50), rng.normal(size=(50, 2))])
        design = _design(X)
        fit = ols_fit(design, rng.normal(size=50))
        report = diagnostics(fit, design)
        assert report.qq_theoretical.shape == (50,)
        assert np.all(np.diff(report.qq_observed) >= 0)
        assert report.bp_statistic >= 0
        assert 0 <= report.bp_p_value <= 1
        assert report.residuals_vs_fitted.shape == (50, 2)


def _fake_rows(n=120, seed=0, languages=("go", "rust"), domains=("web", "cli")):
    rng = np.random.default_rng(seed)
    rows = []
    lsm_all = rng.uniform(0.3, 0.95, size=(n, 13))
    lsm_all[:, 0] = lsm_all[:, 1:].mean(axis=1)
    for i in range(n):
        rows.append(
            RecordRow(
                project=f"p{i:03d}",
                outcomes={
                    "new_c": float(5 + 2 * lsm_all[i, 0] + rng.normal(0, 0.3)),
                    "bct": float(rng.uniform(2, 12)),
                    "new_b": float(rng.uniform(1, 8)),
                    "bfr": float(rng.uniform(0.2, 1.0)),
                },
                lsm=[float(v) for v in lsm_all[i]],
                controls={
                    "elite_ratio": float(rng.uniform(0.05, 0.6)),
                    "project_size": float(rng.uniform(3, 20)),
                    "sponsorship": bool(rng.random() < 0.5),
                    "avg_experience": float(rng.uniform(50, 900)),
                    "main_language": str(rng.choice(list(languages))),
                    "domain": str(rng.choice(list(domains))),
                },
                flags=[],
            )
        )
    return rows


class TestModelSuite:
    def test_twenty_models_with_expected_ids(self):
        rows = _fake_rows(200)
        suite = model_suite(rows)
        assert len(suite.models) == 20
        expected = {
            f"{out}_{setname}"
            for out in ("newc", "bct", "newb", "bfr")
            for setname in ("base", "comp", "func", "summ", "all")
        }
        assert set(suite.models) == expected

    def test_variable_sets(self):
        rows = _fake_rows(200)
        suite = model_suite(rows)
        comp_cols = suite.models["newc_comp"].fit.columns
        assert "lsm0" in comp_cols and "lsm1" not in comp_cols
        func_cols = suite.models["bct_func"].fit.columns
        assert all(f"lsm{i}" in func_cols for i in range(1, 9))
        assert "lsm0" not in func_cols and "lsm9" not in func_cols
        summ_cols = suite.models["newb_summ"].fit.columns
        assert all(f"lsm{i}" in summ_cols for i in range(9, 13))
        all_cols = suite.models["bfr_all"].fit.columns
        assert all(f"lsm{i}" in all_cols for i in range(1, 13))
        base_cols = suite.models["newc_base"].fit.columns
        assert not any(c.startswith("lsm") for c in base_cols)

    def test_f_test_present_for_non_base(self):
        rows = _fake_rows(150)
        suite = model_suite(rows)
        assert suite.models["newc_base"].f_vs_baseline is None
        f = suite.models["newc_comp"].f_vs_baseline
        assert f is not None and f["df_num"] == 1

    def test_flagged_rows_dropped(self):
        rows = _fake_rows(100)
        rows[3].flags = ["lsm-undefined"]
        rows[3].lsm = [None] * 13
        suite = model_suite(rows)
        assert suite.n_used == 99
        assert suite.dropped == ["p003"]

    def test_insufficient_records_aborts_with_explanation(self):
        rows = _fake_rows(10)
        with pytest.raises(RegressionError, match="cannot support"):
            model_suite(rows)

    def test_permutation_invariance(self):
        rows = _fake_rows(80)
        suite_a = model_suite(rows)
        rng = np.random.default_rng(9)
        shuffled = list(rows)
        rng.shuffle(shuffled)
        suite_b = model_suite(shuffled)
        for mid in suite_a.models:
            fa, fb = suite_a.models[mid].fit, suite_b.models[mid].fit
            named_a = dict(zip(fa.columns, fa.beta))
            named_b = dict(zip(fb.columns, fb.beta))
            for name, value in named_a.items():
                assert abs(named_b[name] - value) < 1e-12

    def test_vif_screen_triggers_refit(self):
        rows = _fake_rows(100, seed=23)
        rng = np.random.default_rng(24)
        for row in rows:
            # near-copy of lsm1 with independent jitter: inflated but full rank
            row.lsm[2] = row.lsm[1] + float(rng.normal(0, 0.01))
        suite = model_suite(rows)
        entry = suite.models["newc_func"]
        assert {"lsm1", "lsm2"} <= set(entry.diagnostics.vif_flagged)
        assert entry.vif_refit is not None
        assert "lsm1" not in entry.vif_refit.columns
        assert "lsm2" not in entry.vif_refit.columns

    def test_dummy_reference_invariance(self):
        # swapping which language is most frequent changes coefficients but
        # not fitted values or r^2
        rows = _fake_rows(90, seed=11)
        suite_a = model_suite(rows)
        flipped = _fake_rows(90, seed=11)
        for row in flipped:
            lang = row.controls["main_language"]
            row.controls["main_language"] = {"go": "rust", "rust": "go"}[lang]
        suite_b = model_suite(flipped)
        for mid in suite_a.models:
            assert suite_a.models[mid].fit.r_squared == pytest.approx(
                suite_b.models[mid].fit.r_squared, abs=1e-9
            )
            assert suite_a.models[mid].fit.fitted == pytest.approx(
                suite_b.models[mid].fit.fitted, abs=1e-9
            )


class TestQuadraticModel:
    def test_planted_inverse_u(self):
        rows = _fake_rows(200, seed=13)
        lsm0 = np.array([r.lsm[0] for r in rows])
        rng = np.random.default_rng(14)
        for row, v in zip(rows, lsm0):
            row.outcomes["new_c"] = float(-30.0 * (v - 0.65) ** 2 + rng.normal(0, 0.05))
        entry = quadratic_model(rows, "newc")
        table = {r["name"]: r for r in entry.fit.coef_table()}
        assert table["lsm0_sq"]["beta"] < 0
        assert table["lsm0_sq"]["p"] < 0.05

    def test_centering_reparameterization_invariance(self):
        rows = _fake_rows(150, seed=15)
        entry = quadratic_model(rows, "newc")
        usable = [r for r in rows if r.complete]
        lsm0 = np.array([r.lsm[0] for r in usable])
        uncentered_sq = lsm0**2
        design = build_design(usable, ["lsm0"], outcome="new_c", extra_columns={"lsm0_sq": uncentered_sq})
        fit_uncentered = ols_fit(design)
        assert entry.fit.fitted == pytest.approx(fit_uncentered.fitted, abs=1e-9)


class TestDescribe:
    def test_constant_column_point_mass(self):
        s = summarize_variable("x", np.full(10, 0.7))
        assert s.sd == 0.0
        assert s.point_mass == 0.7
        assert s.kde_x is None

    def test_quantiles_match_sorted_recount(self):
        rng = np.random.default_rng(16)
        values = rng.uniform(0, 1, size=10)
        s = summarize_variable("x", values)
        sorted_vals = np.sort(values)
        assert s.quantiles["min"] == pytest.approx(sorted_vals[0])
        assert s.quantiles["max"] == pytest.approx(sorted_vals[-1])
        assert s.quantiles["median"] == pytest.approx(np.median(values))

    def test_identical_corpora_not_significant(self):
        rows = _fake_rows(30)
        profiles = []
        for i in range(30):
            for corpus in ("cross", "within_elite", "within_nonelite"):
                row = {"project": f"p{i}", "corpus": corpus}
                row.update({cat: 5.0 + i * 0.1 for cat in
                            ("personal_pronouns", "impersonal_pronouns", "articles", "prepositions",
                             "auxiliary_verbs", "common_adverbs", "conjunctions", "negations",
                             "analytic", "clout", "authentic", "tone")})
                profiles.append(row)
        result = describe_lsm(rows, profiles)
        assert result.three_corpora
        for comp in result.three_corpora:
            assert comp["p"] > 0.05

    def test_kde_uses_silverman(self):
        rng = np.random.default_rng(17)
        values = rng.normal(size=50)
        s = summarize_variable("x", values)
        assert s.kde_x is not None and len(s.kde_x) == 128
        # density integrates to ~1
        area = np.trapezoid(s.kde_y, s.kde_x)
        assert area == pytest.approx(1.0, abs=0.02)
