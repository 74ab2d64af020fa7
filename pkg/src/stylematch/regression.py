"""OLS regression suite: 20 models, collinearity screening, diagnostics.

For each of the four outcomes there are five models: controls only
(baseline), composite matching score + controls, the 8 function-word
scores + controls, the 4 summary scores + controls, and all 12 + controls.
Fits use a QR decomposition (never the normal equations); each non-baseline
model is compared to its baseline with an F-test on the added block.
Predictors with variance inflation above the configured threshold are
listed and excluded in a re-fit pass.  Categorical controls enter as k-1
dummy columns against the most frequent reference level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import stats as sstats

from .metrics import LSM_NAMES, RecordRow

logger = logging.getLogger(__name__)

DEFAULT_VIF_THRESHOLD = 5.0

OUTCOME_KEYS = {"newc": "new_c", "bct": "bct", "newb": "new_b", "bfr": "bfr"}
MODEL_SETS = {
    "base": [],
    "comp": ["lsm0"],
    "func": [f"lsm{i}" for i in range(1, 9)],
    "summ": [f"lsm{i}" for i in range(9, 13)],
    "all": [f"lsm{i}" for i in range(1, 13)],
}
NUMERIC_CONTROLS = ["elite_ratio", "project_size", "avg_experience"]


class RegressionError(Exception):
    pass


class RankDeficiencyError(RegressionError):
    def __init__(self, columns: list[str]):
        super().__init__(f"design matrix is rank deficient; dependent columns: {columns}")
        self.columns = columns


@dataclass
class DesignMatrix:
    """Numeric design with an explicit intercept column at index 0."""

    X: np.ndarray
    columns: list[str]
    rows: list[str]
    y: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        """Number of predictors excluding the intercept."""
        return self.X.shape[1] - 1


@dataclass
class FitResult:
    model_id: str
    outcome: str
    columns: list[str]
    beta: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    r_squared: float
    adj_r_squared: float
    n: int
    m: int
    rss: float

    def coef_table(self) -> list[dict]:
        return [
            {
                "name": self.columns[j],
                "beta": float(self.beta[j]),
                "se": float(self.std_errors[j]),
                "t": float(self.t_stats[j]),
                "p": float(self.p_values[j]),
            }
            for j in range(len(self.columns))
        ]


@dataclass
class DiagnosticsReport:
    vif: dict[str, float]
    vif_flagged: list[str]
    leverage: np.ndarray
    leverage_flagged: list[int]
    leverage_cutoff: float
    skewness: float
    excess_kurtosis: float
    qq_theoretical: np.ndarray
    qq_observed: np.ndarray
    bp_statistic: float
    bp_p_value: float
    residuals_vs_fitted: np.ndarray  # shape (n, 2)


def dummy_encode(values: list[str], name: str) -> tuple[list[str], np.ndarray]:
    """k-1 dummy columns; the reference is the most frequent level (ties
    broken lexicographically), remaining levels ordered by descending
    frequency then lexicographically."""
    levels: dict[str, int] = {}
    for v in values:
        levels[v] = levels.get(v, 0) + 1
    if len(levels) <= 1:
        logger.warning("categorical control %r has a single level; no columns emitted", name)
        return [], np.zeros((len(values), 0))
    reference = sorted(levels, key=lambda lv: (-levels[lv], lv))[0]
    rest = sorted((lv for lv in levels if lv != reference), key=lambda lv: (-levels[lv], lv))
    cols = np.zeros((len(values), len(rest)))
    for j, level in enumerate(rest):
        cols[:, j] = [1.0 if v == level else 0.0 for v in values]
    return [f"{name}[{level}]" for level in rest], cols


def build_design(
    records: list[RecordRow],
    lsm_vars: list[str],
    outcome: str | None = None,
    extra_columns: dict[str, np.ndarray] | None = None,
) -> DesignMatrix:
    """Assemble intercept + LSM block + encoded controls for complete records."""
    rows = [r.project for r in records]
    names: list[str] = ["intercept"]
    blocks: list[np.ndarray] = [np.ones((len(records), 1))]

    lsm_index = {nm: i for i, nm in enumerate(LSM_NAMES)}
    for var in lsm_vars:
        col = np.array([r.lsm[lsm_index[var]] for r in records], dtype=float)
        names.append(var)
        blocks.append(col[:, None])
    if extra_columns:
        for nm, col in extra_columns.items():
            names.append(nm)
            blocks.append(np.asarray(col, dtype=float)[:, None])

    for ctl in NUMERIC_CONTROLS:
        col = np.array([r.controls[ctl] for r in records], dtype=float)
        names.append(ctl)
        blocks.append(col[:, None])
    names.append("sponsorship")
    blocks.append(np.array([[1.0 if r.controls["sponsorship"] else 0.0] for r in records]))
    for cat in ("main_language", "domain"):
        values = [str(r.controls[cat]) for r in records]
        cat_names, cols = dummy_encode(values, cat)
        names.extend(cat_names)
        if cols.shape[1]:
            blocks.append(cols)

    X = np.hstack(blocks)
    y = None
    if outcome is not None:
        y = np.array([r.outcomes[outcome] for r in records], dtype=float)
    return DesignMatrix(X=X, columns=names, rows=rows, y=y)


def _check_rank(X: np.ndarray, columns: list[str]) -> None:
    _, r, piv = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        raise RankDeficiencyError(columns)
    tol = diag[0] * max(X.shape) * np.finfo(float).eps
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        dependent = [columns[j] for j in sorted(piv[rank:])]
        raise RankDeficiencyError(dependent)


def ols_fit(design: DesignMatrix, y: np.ndarray | None = None, model_id: str = "", outcome: str = "") -> FitResult:
    """Least squares via QR, with t-based inference.

    Requires n > m + 1 and a full-rank design; rank deficiency raises with
    the names of the dependent columns.
    """
    X = design.X
    yv = np.asarray(design.y if y is None else y, dtype=float)
    n, p = X.shape
    if n <= p:
        raise RegressionError(f"not enough rows: n={n} must exceed {p} parameters")
    _check_rank(X, design.columns)

    q_mat, r_mat = np.linalg.qr(X)
    beta = sla.solve_triangular(r_mat, q_mat.T @ yv)
    fitted = X @ beta
    resid = yv - fitted
    rss = float(resid @ resid)
    dof = n - p
    sigma2 = rss / dof
    r_inv = sla.solve_triangular(r_mat, np.eye(p))
    xtx_inv_diag = np.sum(r_inv * r_inv, axis=1)
    se = np.sqrt(sigma2 * xtx_inv_diag)
    t_stats = np.zeros_like(beta)
    np.divide(beta, se, out=t_stats, where=se > 0)
    t_stats = np.where((se <= 0) & (beta != 0), np.inf * np.sign(beta), t_stats)
    p_values = 2.0 * sstats.t.sf(np.abs(t_stats), dof)

    tss = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof if dof > 0 else float("nan")
    return FitResult(
        model_id=model_id,
        outcome=outcome,
        columns=list(design.columns),
        beta=beta,
        std_errors=se,
        t_stats=t_stats,
        p_values=p_values,
        residuals=resid,
        fitted=fitted,
        r_squared=r2,
        adj_r_squared=adj,
        n=n,
        m=p - 1,
        rss=rss,
    )


def _r_squared(X: np.ndarray, y: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss <= 0:
        return 0.0
    return 1.0 - float(resid @ resid) / tss


def vif(design: DesignMatrix) -> dict[str, float]:
    """Variance inflation 1/(1-R^2_j) per non-intercept predictor."""
    X = design.X
    values: dict[str, float] = {}
    for j in range(1, X.shape[1]):
        others = np.delete(X, j, axis=1)
        r2 = _r_squared(others, X[:, j])
        values[design.columns[j]] = float("inf") if r2 >= 1.0 else 1.0 / (1.0 - r2)
    return values


def diagnostics(
    fit: FitResult, design: DesignMatrix, vif_threshold: float = DEFAULT_VIF_THRESHOLD
) -> DiagnosticsReport:
    """Leverage, normality descriptives, heteroskedasticity, linearity data."""
    X = design.X
    n, p = X.shape
    q_mat, _ = np.linalg.qr(X)
    leverage = np.sum(q_mat * q_mat, axis=1)
    cutoff = 2.0 * p / n
    flagged = [i for i in range(n) if leverage[i] > cutoff]

    sigma = np.sqrt(fit.rss / (n - p))
    denom = sigma * np.sqrt(np.clip(1.0 - leverage, 1e-12, None))
    studentized = fit.residuals / denom
    skewness = float(sstats.skew(studentized))
    kurt = float(sstats.kurtosis(studentized))  # excess
    order = np.argsort(studentized, kind="stable")
    qq_obs = studentized[order]
    qq_theo = sstats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)

    # Breusch-Pagan LM statistic: n * R^2 of e^2 regressed on the design
    e2 = fit.residuals**2
    bp_r2 = _r_squared(X, e2)
    bp_stat = n * bp_r2
    bp_p = float(sstats.chi2.sf(bp_stat, fit.m)) if fit.m > 0 else float("nan")

    vif_values = vif(design)
    vif_flagged = sorted([nm for nm, v in vif_values.items() if v > vif_threshold])

    return DiagnosticsReport(
        vif=vif_values,
        vif_flagged=vif_flagged,
        leverage=leverage,
        leverage_flagged=flagged,
        leverage_cutoff=cutoff,
        skewness=skewness,
        excess_kurtosis=kurt,
        qq_theoretical=qq_theo,
        qq_observed=qq_obs,
        bp_statistic=float(bp_stat),
        bp_p_value=bp_p,
        residuals_vs_fitted=np.column_stack([fit.fitted, fit.residuals]),
    )


def block_f_test(base: FitResult, full: FitResult) -> dict:
    """F-test on the block of predictors added to the baseline."""
    q = full.m - base.m
    if q <= 0:
        raise RegressionError("full model must add predictors over the baseline")
    dof = full.n - full.m - 1
    num = (base.rss - full.rss) / q
    den = full.rss / dof
    f_stat = num / den if den > 0 else float("inf")
    p = float(sstats.f.sf(f_stat, q, dof))
    return {"f": float(f_stat), "df_num": q, "df_den": dof, "p": p}


@dataclass
class ModelEntry:
    fit: FitResult
    diagnostics: DiagnosticsReport
    f_vs_baseline: dict | None = None
    vif_refit: FitResult | None = None


@dataclass
class SuiteResult:
    models: dict[str, ModelEntry]
    n_records: int
    n_used: int
    dropped: list[str]
    vif_threshold: float


def _usable(records: list[RecordRow]) -> tuple[list[RecordRow], list[str]]:
    usable = [r for r in records if r.complete]
    dropped = sorted(r.project for r in records if not r.complete)
    return usable, dropped


def model_suite(
    records: list[RecordRow], vif_threshold: float = DEFAULT_VIF_THRESHOLD
) -> SuiteResult:
    """Fit the 20-model inventory: {newc,bct,newb,bfr} x {base,comp,func,summ,all}.

    Flagged records are dropped listwise (counts reported).  Every model gets
    diagnostics; non-baseline models get an F-test against their baseline;
    models with above-threshold VIF predictors get a re-fit without them.
    """
    usable, dropped = _usable(records)
    models: dict[str, ModelEntry] = {}
    for out_tag, out_key in OUTCOME_KEYS.items():
        baselines: dict[str, FitResult] = {}
        for set_tag, lsm_vars in MODEL_SETS.items():
            model_id = f"{out_tag}_{set_tag}"
            design = build_design(usable, lsm_vars, outcome=out_key)
            if design.n <= design.X.shape[1]:
                raise RegressionError(
                    f"model {model_id}: {design.n} usable records cannot support "
                    f"{design.X.shape[1]} parameters"
                )
            fit = ols_fit(design, model_id=model_id, outcome=out_key)
            diag = diagnostics(fit, design, vif_threshold)
            entry = ModelEntry(fit=fit, diagnostics=diag)
            if set_tag == "base":
                baselines[out_tag] = fit
            else:
                entry.f_vs_baseline = block_f_test(baselines[out_tag], fit)
            if diag.vif_flagged:
                keep = [c for c in design.columns if c not in diag.vif_flagged]
                idx = [design.columns.index(c) for c in keep]
                refit_design = DesignMatrix(
                    X=design.X[:, idx], columns=keep, rows=design.rows, y=design.y
                )
                entry.vif_refit = ols_fit(refit_design, model_id=model_id + "_vifrefit", outcome=out_key)
            models[model_id] = entry
    return SuiteResult(
        models=models,
        n_records=len(records),
        n_used=len(usable),
        dropped=dropped,
        vif_threshold=vif_threshold,
    )


def quadratic_model(
    records: list[RecordRow], outcome_tag: str, vif_threshold: float = DEFAULT_VIF_THRESHOLD
) -> ModelEntry:
    """Composite model plus a mean-centered squared composite column."""
    if outcome_tag not in OUTCOME_KEYS:
        raise RegressionError(f"unknown outcome {outcome_tag!r}")
    usable, _ = _usable(records)
    lsm0 = np.array([r.lsm[0] for r in usable], dtype=float)
    centered_sq = (lsm0 - lsm0.mean()) ** 2
    design = build_design(
        usable, ["lsm0"], outcome=OUTCOME_KEYS[outcome_tag], extra_columns={"lsm0_sq": centered_sq}
    )
    fit = ols_fit(design, model_id=f"{outcome_tag}_quad", outcome=OUTCOME_KEYS[outcome_tag])
    diag = diagnostics(fit, design, vif_threshold)
    return ModelEntry(fit=fit, diagnostics=diag)


# --- descriptive statistics ---------------------------------------------------


@dataclass
class VariableSummary:
    name: str
    n: int
    mean: float
    sd: float
    quantiles: dict[str, float]
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    kde_x: np.ndarray | None
    kde_y: np.ndarray | None
    point_mass: float | None  # set when the column is constant


def _silverman_bandwidth(x: np.ndarray) -> float:
    n = x.size
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    iqr = float(np.subtract(*np.percentile(x, [75, 25])))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** (-0.2)


def summarize_variable(name: str, values: np.ndarray, bins: int = 10, grid: int = 128) -> VariableSummary:
    x = np.asarray(values, dtype=float)
    n = x.size
    mean = float(x.mean())
    sd = float(x.std(ddof=1)) if n > 1 else 0.0
    qs = np.quantile(x, [0.0, 0.25, 0.5, 0.75, 1.0])
    quantiles = {"min": qs[0], "q1": qs[1], "median": qs[2], "q3": qs[3], "max": qs[4]}
    if sd == 0.0:
        return VariableSummary(
            name=name,
            n=n,
            mean=mean,
            sd=0.0,
            quantiles={k: float(v) for k, v in quantiles.items()},
            hist_edges=np.array([x[0], x[0]]),
            hist_counts=np.array([n]),
            kde_x=None,
            kde_y=None,
            point_mass=float(x[0]),
        )
    counts, edges = np.histogram(x, bins=bins)
    bw = _silverman_bandwidth(x)
    grid_x = np.linspace(x.min() - 3 * bw, x.max() + 3 * bw, grid)
    z = (grid_x[:, None] - x[None, :]) / bw
    kde_y = np.exp(-0.5 * z * z).sum(axis=1) / (n * bw * np.sqrt(2 * np.pi))
    return VariableSummary(
        name=name,
        n=n,
        mean=mean,
        sd=sd,
        quantiles={k: float(v) for k, v in quantiles.items()},
        hist_edges=edges,
        hist_counts=counts,
        kde_x=grid_x,
        kde_y=kde_y,
        point_mass=None,
    )


@dataclass
class DescribeResult:
    variables: list[VariableSummary]
    three_corpora: list[dict]


def describe_lsm(
    records: list[RecordRow],
    corpus_profiles: list[dict] | None = None,
) -> DescribeResult:
    """Distributional summaries for the 13 LSM variables, plus the raw
    three-corpora category comparison with Kruskal-Wallis rank tests.

    `corpus_profiles` rows look like {"project", "corpus", "<variable>": value}
    with corpus in {cross, within_elite, within_nonelite}.
    """
    summaries = []
    for i, name in enumerate(LSM_NAMES):
        vals = np.array([r.lsm[i] for r in records if r.lsm[i] is not None], dtype=float)
        if vals.size == 0:
            continue
        summaries.append(summarize_variable(name, vals))

    comparisons: list[dict] = []
    if corpus_profiles:
        from .lexicon import FUNCTION_CATEGORIES, SUMMARY_VARIABLES

        by_corpus: dict[str, list[dict]] = {}
        for row in corpus_profiles:
            by_corpus.setdefault(str(row["corpus"]), []).append(row)
        groups = ["cross", "within_elite", "within_nonelite"]
        for var in tuple(FUNCTION_CATEGORIES) + tuple(SUMMARY_VARIABLES):
            samples = []
            for g in groups:
                vals = [
                    float(row[var])
                    for row in by_corpus.get(g, [])
                    if row.get(var) is not None and row.get(var) != ""
                ]
                samples.append(vals)
            present = [s for s in samples if len(s) > 0]
            if len(present) < 2:
                continue
            flat = [v for s in present for v in s]
            if all(v == flat[0] for v in flat):
                stat, p = 0.0, 1.0
            else:
                stat, p = sstats.kruskal(*present)
            comparisons.append(
                {
                    "variable": var,
                    "groups": {g: len(s) for g, s in zip(groups, samples)},
                    "kruskal_h": float(stat),
                    "p": float(p),
                }
            )
    return DescribeResult(variables=summaries, three_corpora=comparisons)
