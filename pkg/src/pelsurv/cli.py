"""Command-line interface.

Four commands: ``estimate`` (point estimates as JSON), ``impute``
(filled-in CSV), ``bootstrap`` (variance report as JSON), ``simulate``
(Monte Carlo study).  Exit codes: 0 success, 1 usage, 2 bad data,
3 estimation failure.  File outputs are written to a temp file and
renamed, so a crash never leaves a half-written report.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .bootstrap import bootstrap_variance
from .data import load_meta, parse_sample, serialize_imputed, validate
from .errors import DataError, EstimationError, PelsurvError
from .estimators import estimate, fit_mpele
from .impute import (
    impute_pel_mean,
    impute_pel_random,
    impute_simple_mean,
    impute_simple_random,
    post_imputation_estimates,
)
from .models import model_from_config
from .rng import TAG_STUDY, derive_seed
from .simulate import SimulationConfig, render_text, report_to_dict, run_study

_EXIT_OK = 0
_EXIT_USAGE = 1
_EXIT_DATA = 2
_EXIT_ESTIMATION = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pelsurv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--data", required=True, help="sample CSV")
        p.add_argument("--meta", required=True, help="strata/categories JSON")
        p.add_argument("--model", required=True, help="category model JSON")
        p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("estimate", help="point estimates, optionally with bootstrap SEs")
    add_common(p)
    p.add_argument("--B", type=int, default=0, help="bootstrap replicates (0: skip)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("impute", help="fill in missing y values")
    add_common(p)
    p.add_argument(
        "--method", required=True,
        choices=["simple_mean", "simple_random", "pel_mean", "pel_random"],
    )
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bootstrap", help="bootstrap variances and intervals")
    add_common(p)
    p.add_argument("--B", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--method", default=None,
        choices=["simple_mean", "simple_random", "pel_mean", "pel_random"],
        help="also bootstrap the post-imputation estimators of this method",
    )

    p = sub.add_parser("simulate", help="Monte Carlo study")
    p.add_argument("--gamma", type=float, nargs="+", required=True)
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--B", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="JSON report path")
    p.add_argument(
        "--population-mode", default="fixed", choices=["fixed", "regenerated"]
    )
    p.add_argument("--threads", type=int, default=None)

    return parser


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("PELSURV_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _jsonify(obj):
    """JSON-safe copy: numpy scalars to python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    return obj


def _write_out(text: str, path):
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".pelsurv-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _load_inputs(args):
    with open(args.meta) as handle:
        meta = load_meta(handle)
    with open(args.data) as handle:
        sample = parse_sample(handle, meta)
    with open(args.model) as handle:
        config = json.load(handle)
    model = model_from_config(config, n_categories=sample.categories.s)
    return sample, model


def _impute_by_method(sample, model, method, seed):
    if method == "simple_mean":
        return impute_simple_mean(sample)
    if method == "simple_random":
        return impute_simple_random(sample, seed)
    params, weights = fit_mpele(sample, model)
    if method == "pel_mean":
        return impute_pel_mean(sample, model, params, weights)
    return impute_pel_random(sample, model, params, weights, seed)


def _statistic_procedure(model, method=None):
    """(sample, seed) -> named statistics, for the bootstrap command."""

    def compute(sample, seed):
        report = estimate(sample, model)
        out = {f"beta_{k + 1}": v for k, v in enumerate(report.beta_hat.beta)}
        out["y_bar"] = report.y_bar_hat
        labels = sample.categories.labels
        for j, label in enumerate(labels):
            out[f"cell_{label}"] = float(report.cell_means[j])
        out["simple_y_bar"] = report.simple_overall
        for j, label in enumerate(labels):
            out[f"simple_cell_{label}"] = float(report.simple_cell_means[j])
        if method is not None:
            imp = _impute_by_method(sample, model, method, seed)
            y_i, per = post_imputation_estimates(imp)
            out[f"{method}_y_bar"] = y_i
            for j, label in enumerate(labels):
                out[f"{method}_cell_{label}"] = float(per[j])
        return out

    return compute


def _cmd_estimate(args) -> int:
    sample, model = _load_inputs(args)
    report = estimate(sample, model)
    diagnostics = [str(d) for d in validate(sample)]
    simple_overall, simple_cells, cell_matrix = (
        report.simple_overall,
        report.simple_cell_means,
        report.cell_sample_means,
    )
    if simple_overall != simple_overall:
        diagnostics.append(
            "note: simple estimators unavailable (some cell lacks respondents); "
            "reported as null"
        )
    payload = {
        "beta": list(report.beta_hat.beta),
        "y_bar": report.y_bar_hat,
        "cell_means": list(report.cell_means),
        "simple": {
            "y_bar": simple_overall,
            "cell_means": list(simple_cells),
            "cell_sample_means": [list(row) for row in cell_matrix],
        },
        "diagnostics": {
            "messages": diagnostics,
            "search": {
                "evals": report.search.evals,
                "converged": report.search.converged,
                "rejected_fraction": report.search.rejected_fraction,
            },
        },
    }
    if args.B > 0:
        result = bootstrap_variance(
            sample, _statistic_procedure(model), args.B, args.seed
        )
        payload["bootstrap"] = {
            name: {
                "vboot": result.vboot[name],
                "ci": list(result.ci_95[name]),
                "failures": result.failures[name],
            }
            for name in result.statistics
        }
    _write_out(json.dumps(_jsonify(payload), indent=2) + "\n", args.out)
    return _EXIT_OK


def _cmd_impute(args) -> int:
    sample, model = _load_inputs(args)
    imp = _impute_by_method(sample, model, args.method, args.seed)
    _write_out(serialize_imputed(sample, imp.values, imp.imputed_mask), args.out)
    return _EXIT_OK


def _cmd_bootstrap(args) -> int:
    sample, model = _load_inputs(args)
    result = bootstrap_variance(
        sample, _statistic_procedure(model, args.method), args.B, args.seed
    )
    payload = {
        name: {
            "point": result.point[name],
            "vboot": result.vboot[name],
            "ci": list(result.ci_95[name]),
            "failures": result.failures[name],
        }
        for name in result.statistics
    }
    if result.unreliable:
        payload["_flags"] = ["unreliable: some statistic lost more than 2% of replicates"]
    _write_out(json.dumps(_jsonify(payload), indent=2) + "\n", args.out)
    return _EXIT_OK


def _cmd_simulate(args) -> int:
    threads = _threads(args)
    studies = []
    text_blocks = []
    for gi, gamma in enumerate(args.gamma):
        config = SimulationConfig(
            gamma=gamma,
            replicates=args.replicates,
            B=args.B,
            seed=derive_seed(args.seed, TAG_STUDY, gi),
            population_mode=args.population_mode,
        )
        step = max(1, config.replicates // 20)

        def progress(done, total):
            if done % step == 0 or done == total:
                print(
                    f"gamma={gamma:g}: replicate {done}/{total}",
                    file=sys.stderr, flush=True,
                )

        report = run_study(config, threads=threads, progress=progress)
        studies.append(report_to_dict(report))
        text_blocks.append(render_text(report))
    payload = {"seed": args.seed, "studies": studies}
    if args.out is not None:
        _write_out(json.dumps(_jsonify(payload), indent=2) + "\n", args.out)
        sys.stdout.write("\n".join(text_blocks))
    else:
        sys.stdout.write("\n".join(text_blocks))
    return _EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    handlers = {
        "estimate": _cmd_estimate,
        "impute": _cmd_impute,
        "bootstrap": _cmd_bootstrap,
        "simulate": _cmd_simulate,
    }
    try:
        return handlers[args.command](args)
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return _EXIT_DATA
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return _EXIT_ESTIMATION
    except PelsurvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
