"""Command-line interface.

Subcommands:

- ``simulate``    draw a synthetic dataset and write the dataset CSV
- ``fit``         fit one estimator, write predictions ``x1..xd,m_hat``
- ``select-phi``  run the cover search, write the per-member risk table
- ``cover-check`` build and validate a cover spec (nonzero exit on failure)
- ``classify``    fit, threshold, and report misclassification vs Bayes risk
- ``rates``       full Monte Carlo experiment: results CSV plus rate figure

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import config as cfg
from .classify import classifier_from_estimate, risk_report, write_risk_report
from .cover import exp_phi, validate_cover
from .data import generate, read_csv, split, write_csv
from .harness import fit_estimator, run_experiment
from .ht import HTConfig, select_phi_ht
from .selection import select_phi, write_risk_table
from .smoothing import Smoothing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nmarreg",
        description="Kernel regression and classification with NMAR responses",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, **flags):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="dotted-key config file")
        for flag, kwargs in flags.items():
            p.add_argument(flag, **kwargs)
        return p

    add("simulate", "write a synthetic dataset CSV",
        **{"--out": dict(required=True, help="output dataset CSV")})
    add("fit", "fit one estimator and write predictions",
        **{"--out": dict(required=True, help="output predictions CSV"),
           "--data": dict(default=None, help="dataset CSV (generated when omitted)")})
    add("select-phi", "write the per-member risk table",
        **{"--out": dict(required=True, help="output risk-table CSV"),
           "--data": dict(default=None, help="dataset CSV (generated when omitted)"),
           "--plot": dict(default=None, help="optional risk-profile figure (SVG)")})
    add("cover-check", "validate a cover specification")
    add("classify", "report plug-in classification risk",
        **{"--out": dict(required=True, help="output risk-report CSV")})
    add("rates", "run the Monte Carlo experiment",
        **{"--out": dict(required=True, help="output results CSV"),
           "--plot": dict(default=None, help="optional rate figure (SVG)")})
    return parser


def _load_dataset(raw, args, base):
    if getattr(args, "data", None):
        L = cfg._get_float(raw, "data.L", 1.0)
        zc = cfg._get_list(raw, "data.z_coords", None)
        z_coords = tuple(int(v) for v in zc) if zc else None
        return read_csv(args.data, L=L, z_coords=z_coords)
    n = cfg._get_int(raw, "data.n", 2000)
    seed = cfg._get_int(raw, "data.seed", 0)
    dataset, _ = generate(base.model, n, seed)
    return dataset


def _single_estimator(names, command):
    if len(names) != 1:
        raise cfg.ConfigError(f"{command} needs exactly one estimator, got {list(names)}")
    return names[0]


def _cmd_simulate(raw, args):
    base = cfg.experiment_from_config({**raw, "estimator": raw.get("estimator", "nw_full")})
    n = cfg._get_int(raw, "data.n", 2000)
    seed = cfg._get_int(raw, "data.seed", 0)
    dataset, _ = generate(base.model, n, seed)
    write_csv(dataset, args.out)
    print(f"wrote {dataset.n} rows (d={dataset.d}) to {args.out}")
    return 0


def _cmd_fit(raw, args):
    base = cfg.experiment_from_config(raw)
    name = _single_estimator(base.estimators, "fit")
    dataset = _load_dataset(raw, args, base)
    seed = cfg._get_int(raw, "data.seed", 0)
    estimate = fit_estimator(name, dataset, base, [abs(base.seed), 1, seed])
    preds = np.asarray(estimate.predictor(dataset.x))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(f"x{j + 1}" for j in range(dataset.d)) + ",m_hat\n")
        for i in range(dataset.n):
            row = ["%.17g" % v for v in dataset.x[i]] + ["%.17g" % preds[i]]
            fh.write(",".join(row) + "\n")
    print(f"wrote {dataset.n} predictions to {args.out}")
    return 0


def _cmd_select_phi(raw, args):
    base = cfg.experiment_from_config(raw)
    name = _single_estimator(base.estimators, "select-phi")
    if name not in ("select_phi", "ht_tilde", "ht_breve"):
        raise cfg.ConfigError("select-phi needs estimator select_phi, ht_tilde, or ht_breve")
    dataset = _load_dataset(raw, args, base)
    seed = cfg._get_int(raw, "data.seed", 0)
    parts = split(dataset, base.split_alpha, [abs(base.seed), 1, seed])
    m_train = len(parts.train)
    h = base.bandwidth.bandwidth(m_train, dataset.d)
    aux_h = None
    if base.aux_bandwidth is not None:
        aux_h = base.aux_bandwidth.bandwidth(m_train, len(dataset.z_coords))
    smoothing = Smoothing(kernel=base.kernel, h=h, aux_kernel=base.aux_kernel, aux_h=aux_h)
    cover = base.cover.build(dataset.n, dataset.L)
    if name == "select_phi":
        result = select_phi(dataset, parts, cover, smoothing)
        write_risk_table(args.out, cover, result)
    else:
        variant = "tilde" if name == "ht_tilde" else "breve"
        result = select_phi_ht(dataset, parts, cover,
                               HTConfig(smoothing=smoothing, variant=variant, pi0=base.pi0))
        write_risk_table(args.out, cover, result, variant=variant)
    if args.plot:
        from .plots import risk_profile_plot
        risk_profile_plot(cover, result.risks, result.chosen_index, args.plot)
    print(f"selected member {result.chosen_index} ({result.chosen_phi.tag}); "
          f"risk table in {args.out}")
    return 0


def _cmd_cover_check(raw, args):
    settings = cfg.cover_from_config(raw)
    n = cfg._get_int(raw, "data.n", 2000)
    L = cfg._get_float(raw, "data.L", 1.0)
    cover = settings.build(n, L)
    rng = np.random.default_rng(cfg._get_int(raw, "data.seed", 0))
    sample = [exp_phi(g, L) for g in rng.uniform(-settings.M, settings.M, size=1000)]
    report = validate_cover(cover, sample, y_grid_size=1000)
    status = "PASS" if report.ok else "FAIL"
    print(f"{status}: {len(cover)} members at epsilon={cover.epsilon:.6g}; "
          f"worst distance {report.max_distance:.6g} at {report.worst_sample_tag} "
          f"(y={report.worst_y:.4g})")
    return 0 if report.ok else 2


def _cmd_classify(raw, args):
    base = cfg.experiment_from_config(raw)
    name = _single_estimator(base.estimators, "classify")
    if base.model.task != "classification":
        raise cfg.ConfigError("classify needs a classification model.kind")
    n = cfg._get_int(raw, "data.n", 2000)
    seed = cfg._get_int(raw, "data.seed", 0)
    dataset, _ = generate(base.model, n, seed)
    estimate = fit_estimator(name, dataset, base, [abs(base.seed), 1, seed])
    classifier = classifier_from_estimate(estimate)
    report = risk_report(
        classifier, base.model,
        n_eval=cfg._get_int(raw, "classify.n_eval", base.n_eval),
        seed=cfg._get_int(raw, "classify.seed", base.seed + 1),
    )
    write_risk_report(args.out, report)
    print(f"risk={report.empirical_risk:.4f} bayes={report.bayes_risk:.4f} "
          f"excess={report.excess:.4f}; report in {args.out}")
    return 0


def _cmd_rates(raw, args):
    base = cfg.experiment_from_config(raw)
    result = run_experiment(base, csv_path=args.out, plot_path=args.plot)
    for agg in result.aggregates:
        print(f"{agg.estimator} n={agg.n}: median={agg.median:.6g} "
              f"iqr={agg.iqr:.6g} ok={agg.n_ok}")
    for name, fit in result.rate_fits.items():
        print(f"{name}: rate slope {fit.slope:.3f} (R^2={fit.r_squared:.3f})")
    print(f"results in {args.out}" + (f", figure in {args.plot}" if args.plot else ""))
    return 0


COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "select-phi": _cmd_select_phi,
    "cover-check": _cmd_cover_check,
    "classify": _cmd_classify,
    "rates": _cmd_rates,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        raw = cfg.load_config(args.config)
        return COMMANDS[args.command](raw, args)
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
