"""Monte Carlo study harness.

Generates a stratified finite population (gamma-distributed y, ordinal z
from a proportional-odds model), repeatedly draws stratified simple
random samples without replacement, applies logistic nonresponse that
depends on z alone, runs every estimator plus the bootstrap on each
replicate, and aggregates relative bias, Monte Carlo variance, mean
bootstrap variance, coverage of normal-theory intervals, and MSE ratios
against the simple competitors.

Every random draw is keyed by (seed, purpose, index), so a study is
reproducible for a given config regardless of thread count, and replicate
r of a run is unchanged when the replicate budget grows.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bootstrap import _resample_indices
from .data import (
    CategorySpace,
    SampleUnit,
    StratifiedSample,
    make_strata,
    subset_view,
)
from .errors import EstimationError, PelsurvError
from .estimators import _simple_from_arrays
from .impute import (
    _fill_from_matrix,
    _pel_random_values,
    _pel_value_matrix,
    _post_values_stats,
    _simple_random_values,
)
from .models import ModelParams, ProportionalOddsModel, _logistic
from .optimize import SearchConfig, maximize
from .pel import f_matrix, masses_from_f, objective_plan, table_from_view
from .rng import (
    TAG_BOOTSTRAP,
    TAG_POPULATION_Y,
    TAG_POPULATION_Z,
    TAG_RESPONSE,
    TAG_SAMPLE,
    TAG_STUDY,
    derive_seed,
    keyed_generator,
)

RESPONSE_INTERCEPT = -0.1

_PEL_FAMILIES = ("pel", "pel_mean_imp", "pel_random_imp")
_SIMPLE_FAMILIES = ("simple", "simple_mean_imp", "simple_random_imp")


@dataclass(frozen=True)
class SimulationConfig:
    gamma: float = 0.7
    strata_sizes: tuple = (3370, 2910, 5430, 4110)
    y_distributions: tuple = ((43, 0.20), (42, 0.19), (38, 0.20), (50, 0.17))
    n_categories: int = 5
    slope: float = -0.4
    sampling_fraction: float = 0.03
    replicates: int = 1000
    B: int = 200
    seed: int = 0
    population_mode: str = "fixed"

    def __post_init__(self):
        if len(self.strata_sizes) != len(self.y_distributions):
            raise PelsurvError("one y distribution per stratum is required")
        if any(n < 1 for n in self.strata_sizes):
            raise PelsurvError("strata sizes must be positive")
        if any(a <= 0 or b <= 0 for a, b in self.y_distributions):
            raise PelsurvError("gamma shape and scale must be positive")
        if not 0 < self.sampling_fraction <= 1:
            raise PelsurvError("sampling fraction must be in (0, 1]")
        if any(int(n * self.sampling_fraction) < 2 for n in self.strata_sizes):
            raise PelsurvError("sampling fraction gives a stratum fewer than 2 units")
        if self.n_categories < 1:
            raise PelsurvError("n_categories must be at least 1")
        if self.replicates < 1 or self.B < 0:
            raise PelsurvError("replicates must be >= 1 and B >= 0")
        if self.population_mode not in ("fixed", "regenerated"):
            raise PelsurvError(f"unknown population_mode {self.population_mode!r}")

    def model(self) -> ProportionalOddsModel:
        return ProportionalOddsModel(self.n_categories)


@dataclass(frozen=True, eq=False)
class Population:
    """A realized finite population and its exact targets."""

    h_labels: tuple
    sizes: tuple
    y: tuple  # per-stratum float arrays
    z0: tuple  # per-stratum 0-based category arrays
    y_bar: float
    cell_means: np.ndarray
    cell_counts: np.ndarray


def generate_population(config: SimulationConfig, seed: int) -> Population:
    model = config.model()
    s = config.n_categories
    ys, zs = [], []
    for hi, (n_h, (shape, scale)) in enumerate(
        zip(config.strata_sizes, config.y_distributions)
    ):
        h = hi + 1
        y = keyed_generator(seed, TAG_POPULATION_Y, h).gamma(shape, scale, size=n_h)
        cdf = np.cumsum(
            model.prob_matrix(h, y, np.array([config.slope])), axis=1
        )
        u = keyed_generator(seed, TAG_POPULATION_Z, h).random(n_h)
        z0 = np.minimum((cdf < u[:, None]).sum(axis=1), s - 1)
        ys.append(y)
        zs.append(z0)
    all_y = np.concatenate(ys)
    all_z = np.concatenate(zs)
    counts = np.bincount(all_z, minlength=s).astype(np.float64)
    sums = np.bincount(all_z, weights=all_y, minlength=s)
    means = np.full(s, np.nan)
    np.divide(sums, counts, out=means, where=counts > 0)
    return Population(
        h_labels=tuple(range(1, len(ys) + 1)),
        sizes=tuple(config.strata_sizes),
        y=tuple(ys),
        z0=tuple(zs),
        y_bar=float(all_y.mean()),
        cell_means=means,
        cell_counts=counts,
    )


def response_probability(gamma: float, j) -> np.ndarray:
    """P(respond | Z = j), j 1-based; scalar in, scalar out."""
    return _logistic(RESPONSE_INTERCEPT + gamma * np.asarray(j, dtype=np.float64))


def draw_sample(
    population: Population, fraction: float, gamma: float, seed: int
) -> StratifiedSample:
    """One stratified SRSWOR draw with logistic nonresponse on z.

    n_h = round(N_h * fraction); the weight N_h / (N * n_h) is constant
    within a stratum, and missingness hides y only (z stays observed).
    """
    s = int(max(z.max() for z in population.z0)) + 1
    space = CategorySpace(tuple(str(j + 1) for j in range(s)))
    strata = make_strata(population.sizes, population.h_labels)
    n_total = sum(population.sizes)
    units = []
    for hi, h in enumerate(population.h_labels):
        n_pop = population.sizes[hi]
        n_h = int(np.floor(n_pop * fraction + 0.5))
        pick = keyed_generator(seed, TAG_SAMPLE, h).choice(n_pop, size=n_h, replace=False)
        z0 = population.z0[hi][pick]
        y = population.y[hi][pick]
        u = keyed_generator(seed, TAG_RESPONSE, h).random(n_h)
        responded = u < response_probability(gamma, z0 + 1)
        w = n_pop / (n_total * n_h)
        for k in range(n_h):
            units.append(
                SampleUnit(
                    stratum=h,
                    weight=w,
                    z=space.labels[z0[k]],
                    y=float(y[k]) if responded[k] else None,
                )
            )
    return StratifiedSample(categories=space, strata=strata, units=tuple(units))


def _stat_names(s: int) -> tuple:
    names = ["beta"]
    for family in ("pel", "simple") + _PEL_FAMILIES[1:] + _SIMPLE_FAMILIES[1:]:
        names.append(f"{family}_y_bar")
        names.extend(f"{family}_cell_{j + 1}" for j in range(s))
    return tuple(names)


def _boot_names(s: int) -> tuple:
    names = ["beta"]
    for family in _PEL_FAMILIES:
        names.append(f"{family}_y_bar")
        names.extend(f"{family}_cell_{j + 1}" for j in range(s))
    return tuple(names)


def _pel_statistics(view, table, model, fit_config, impute_seed):
    """[beta, pel 1+s, pel_mean_imp 1+s, pel_random_imp 1+s] or None on failure."""
    try:
        result = maximize(objective_plan(view, table, model), fit_config)
        beta = result.argmax.as_array()
        F = f_matrix(view, model, beta)
        weights = masses_from_f(view, table, F)
    except EstimationError:
        return None, None
    s = view.s
    out = np.full(1 + 3 * (1 + s), np.nan)
    out[0] = beta[0] if beta.size == 1 else np.nan

    total = float(np.sum(weights.p_tilde))
    if total > 0:
        out[1] = np.sum(weights.p_tilde * view.r_y) / total
    wf = weights.p_tilde[:, None] * F
    den = wf.sum(axis=0)
    num = (wf * view.r_y[:, None]).sum(axis=0)
    cells = np.full(s, np.nan)
    np.divide(num, den, out=cells, where=den > 0)
    out[2 : 2 + s] = cells

    vals = _fill_from_matrix(view, _pel_value_matrix(view, weights.p_hat, F))
    out[2 + s], out[3 + s : 3 + 2 * s] = _post_values_stats(view, vals)
    vals = _pel_random_values(view, weights.p_hat, F, impute_seed)
    out[3 + 2 * s], out[4 + 2 * s : 4 + 3 * s] = _post_values_stats(view, vals)
    return out, float(beta[0])


def _simple_statistics(view, table, impute_seed):
    """[simple 1+s, simple_mean_imp 1+s, simple_random_imp 1+s]."""
    s = view.s
    out = np.full(3 * (1 + s), np.nan)
    overall, per_cat, means = _simple_from_arrays(view, table)
    out[0] = overall
    out[1 : 1 + s] = per_cat
    vals = _fill_from_matrix(view, means)
    out[1 + s], out[2 + s : 2 + 2 * s] = _post_values_stats(view, vals)
    vals = _simple_random_values(view, impute_seed)
    out[2 + 2 * s], out[3 + 2 * s : 3 + 3 * s] = _post_values_stats(view, vals)
    return out


def _assemble_point(view, table, model, fit_config, impute_seed):
    """Full 1 + 6(1+s) statistic vector in _stat_names order."""
    m = 1 + view.s  # one family block: y_bar plus the cell means
    pel, beta = _pel_statistics(view, table, model, fit_config, impute_seed)
    simple = _simple_statistics(view, table, impute_seed)
    out = np.full(1 + 6 * m, np.nan)
    if pel is not None:
        out[0 : 1 + m] = pel[0 : 1 + m]
        out[1 + 2 * m : 1 + 4 * m] = pel[1 + m :]
    out[1 + m : 1 + 2 * m] = simple[0:m]
    out[1 + 4 * m : 1 + 6 * m] = simple[m:]
    return out, beta


@dataclass(frozen=True, eq=False)
class SimulationReport:
    config: SimulationConfig
    statistics: tuple
    targets: dict
    n_ok: dict
    rel_bias_pct: dict
    var: dict
    mse: dict
    vboot_mean: dict
    cp_pct: dict
    rat: dict
    boot_failure_rate: dict


def run_study(
    config: SimulationConfig,
    threads: int = 1,
    progress=None,
) -> SimulationReport:
    """Run the replicate loop and aggregate a Table-2-style report.

    ``progress(done, total)`` is called after each replicate when given.
    The report is identical for identical configs, whatever ``threads``.
    """
    model = config.model()
    s = config.n_categories
    names = _stat_names(s)
    boot_names = _boot_names(s)
    boot_pos = [names.index(n) for n in boot_names]
    R, B = config.replicates, config.B

    fixed_pop = (
        generate_population(config, config.seed)
        if config.population_mode == "fixed"
        else None
    )

    points = np.full((R, len(names)), np.nan)
    targets_r = np.full((R, len(names)), np.nan)
    vboots = np.full((R, len(boot_names)), np.nan)
    boot_fail = np.full((R, len(boot_names)), np.nan)

    def one_replicate(r: int):
        pop = fixed_pop
        if pop is None:
            pop = generate_population(config, derive_seed(config.seed, TAG_STUDY, r, 3))
        sample = draw_sample(
            pop, config.sampling_fraction, config.gamma,
            derive_seed(config.seed, TAG_STUDY, r),
        )
        view = sample.packed()
        table = table_from_view(view)
        fit_config = SearchConfig(initial=ModelParams((0.0,) * model.param_dim))
        point, beta = _assemble_point(
            view, table, model, fit_config,
            derive_seed(config.seed, TAG_STUDY, r, 2),
        )
        points[r] = point
        targets_r[r] = _targets_for(names, config, pop)

        if B > 0:
            _bootstrap_replicate(r, view, model, beta, config)

    def _bootstrap_replicate(r, view, model, beta, config):
        boot_seed = derive_seed(config.seed, TAG_STUDY, r, 1)
        warm = ModelParams((beta,)) if beta is not None else ModelParams(
            (0.0,) * model.param_dim
        )
        # warm-started refits need neither the full restart budget nor
        # tolerances far below the statistic's own noise floor
        fit_config = SearchConfig(
            initial=warm, initial_simplex_scale=0.05, tol_x=1e-7, restarts=1
        )
        reps = np.full((B, len(boot_names)), np.nan)
        for b in range(B):
            sub = subset_view(view, _resample_indices(view, boot_seed, b))
            sub_table = table_from_view(sub)
            pel, _ = _pel_statistics(
                sub, sub_table, model, fit_config,
                derive_seed(boot_seed, TAG_BOOTSTRAP, b, 1),
            )
            if pel is not None:
                reps[b] = pel
        counts = (~np.isnan(reps)).sum(axis=0)
        vb = np.full(len(boot_names), np.nan)
        for k in range(len(boot_names)):
            col = reps[:, k]
            col = col[~np.isnan(col)]
            if col.size >= 2:
                vb[k] = np.var(col, ddof=1)
        vboots[r] = vb
        boot_fail[r] = (B - counts) / B

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = 0
            for _ in pool.map(one_replicate, range(R)):
                done += 1
                if progress is not None:
                    progress(done, R)
    else:
        for r in range(R):
            one_replicate(r)
            if progress is not None:
                progress(r + 1, R)

    return _aggregate(
        config, names, boot_names, boot_pos, points, targets_r, vboots, boot_fail
    )


def _targets_for(names, config, pop) -> np.ndarray:
    out = np.empty(len(names))
    for k, name in enumerate(names):
        if name == "beta":
            out[k] = config.slope
        elif name.endswith("_y_bar"):
            out[k] = pop.y_bar
        else:
            out[k] = pop.cell_means[int(name.rsplit("_", 1)[1]) - 1]
    return out


def _aggregate(config, names, boot_names, boot_pos, points, targets_r, vboots, boot_fail):
    n_ok, rel_bias, var, mse = {}, {}, {}, {}
    vboot_mean, cp, bfail = {}, {}, {}
    for k, name in enumerate(names):
        col = points[:, k]
        tgt = targets_r[:, k]
        ok = ~np.isnan(col)
        n_ok[name] = int(ok.sum())
        if n_ok[name] == 0:
            rel_bias[name] = var[name] = mse[name] = float("nan")
            continue
        err = col[ok] - tgt[ok]
        mean_tgt = float(tgt[ok].mean())
        rel_bias[name] = 100.0 * float(err.mean()) / mean_tgt if mean_tgt else float("nan")
        var[name] = float(np.var(col[ok], ddof=1)) if n_ok[name] >= 2 else float("nan")
        mse[name] = float(np.mean(err**2))
    for k, name in enumerate(boot_names):
        vb = vboots[:, k]
        pt = points[:, boot_pos[k]]
        tgt = targets_r[:, boot_pos[k]]
        ok = ~np.isnan(vb) & ~np.isnan(pt)
        if not np.any(ok):
            vboot_mean[name] = cp[name] = bfail[name] = float("nan")
            continue
        vboot_mean[name] = float(vb[ok].mean())
        half = 1.96 * np.sqrt(vb[ok])
        cp[name] = 100.0 * float(np.mean(np.abs(pt[ok] - tgt[ok]) <= half))
        fails = boot_fail[:, k]
        bfail[name] = float(np.nanmean(fails)) if np.any(~np.isnan(fails)) else float("nan")

    rat = {}
    for name in names:
        if not name.startswith("pel"):
            continue
        a, b = mse[name], mse["simple" + name[len("pel"):]]
        if a == a and b == b and b > 0:
            rat[name] = a / b

    targets = {
        name: float(np.nanmean(targets_r[:, k])) for k, name in enumerate(names)
    }
    return SimulationReport(
        config=config,
        statistics=names,
        targets=targets,
        n_ok=n_ok,
        rel_bias_pct=rel_bias,
        var=var,
        mse=mse,
        vboot_mean=vboot_mean,
        cp_pct=cp,
        rat=rat,
        boot_failure_rate=bfail,
    )


def report_to_dict(report: SimulationReport) -> dict:
    cfg = report.config
    stats = {}
    for name in report.statistics:
        entry = {
            "n_ok": report.n_ok[name],
            "rel_bias_pct": report.rel_bias_pct[name],
            "var": report.var[name],
            "mse": report.mse[name],
            "target": report.targets[name],
        }
        if name in report.vboot_mean:
            entry["vboot_mean"] = report.vboot_mean[name]
            entry["cp_pct"] = report.cp_pct[name]
            entry["boot_failure_rate"] = report.boot_failure_rate[name]
        if name in report.rat:
            entry["rat"] = report.rat[name]
        stats[name] = entry
    return {
        "config": {
            "gamma": cfg.gamma,
            "strata_sizes": list(cfg.strata_sizes),
            "y_distributions": [list(d) for d in cfg.y_distributions],
            "n_categories": cfg.n_categories,
            "slope": cfg.slope,
            "sampling_fraction": cfg.sampling_fraction,
            "replicates": cfg.replicates,
            "B": cfg.B,
            "seed": cfg.seed,
            "population_mode": cfg.population_mode,
        },
        "statistics": stats,
    }


def _cell(value, width, decimals) -> str:
    if value is None or value != value:
        return "-".rjust(width)
    return f"{value:.{decimals}f}".rjust(width)


def render_text(report: SimulationReport) -> str:
    cfg = report.config
    lines = [
        f"gamma={cfg.gamma:g}  R={cfg.replicates}  B={cfg.B}  "
        f"seed={cfg.seed}  population={cfg.population_mode}",
        f"{'statistic':<26}{'RB%':>8}{'Var':>9}{'Vboot':>9}{'CP%':>7}{'Rat':>8}{'n_ok':>6}",
    ]
    for name in report.statistics:
        lines.append(
            f"{name:<26}"
            + _cell(report.rel_bias_pct[name], 8, 2)
            + _cell(report.var[name], 9, 4)
            + _cell(report.vboot_mean.get(name), 9, 4)
            + _cell(report.cp_pct.get(name), 7, 1)
            + _cell(report.rat.get(name), 8, 3)
            + f"{report.n_ok[name]:>6d}"
        )
    return "\n".join(lines) + "\n"
