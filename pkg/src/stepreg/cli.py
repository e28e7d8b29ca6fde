"""Batch experiment front end.

One subcommand per experiment; a single --seed drives all randomness via
tagged substreams, so identical configs and seeds reproduce outputs byte
for byte.  Reports are CSV (with the resolved config echoed as comment
lines) and each report renders a companion PNG figure next to the output
unless --no-plot is given.  Config files use `key = value` lines; command
line flags override file values, and unknown keys are rejected.

Errors exit nonzero with a single line on stderr of the form
`error: <message>`.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import stepreg
from stepreg import asymptotics, plots, urn
from stepreg.entropy import entropy_functional
from stepreg.model import (
    DataSet,
    StepFunction,
    function_from_json_obj,
    function_to_json_obj,
    l2sq_distance,
    l1_distance,
    load_dataset_csv,
    sample_dataset,
    save_dataset_csv,
)
from stepreg.predictive import exact_log_Z_m, model_posterior
from stepreg.priors import HierarchyPrior
from stepreg.reportio import config_lines, write_csv
from stepreg.sampler import ChainConfig, TuningParams, posterior_mean
from stepreg.seeding import rng_from

__all__ = ["RunConfig", "run", "main"]


class CliError(Exception):
    pass


# parameter schemas: name -> (parser, default, help); None default = optional
def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok != ""]


def _ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok != ""]


_SCHEMAS: dict[str, dict[str, tuple]] = {
    "simulate": {
        "n": (int, 100, "number of data points"),
        "function": (str, None, "truth function JSON file"),
        "const": (float, None, "constant truth level"),
        "step": (str, None, "two-level step truth 'b:left:right'"),
    },
    "fit": {
        "data": (str, None, "dataset CSV (required)"),
        "nu": (str, "geometric:0.5", "split-count prior, kind:params"),
        "iters": (int, 200_000, "chain iterations"),
        "burn_in": (int, 50_000, "burn-in iterations"),
        "thin": (int, 10, "thinning stride"),
        "move_width": (float, 0.2, "split displacement width"),
        "grid_k": (int, 128, "output grid resolution"),
        "truth": (str, None, "optional truth function JSON for error report"),
    },
    "exact-z": {
        "data": (str, None, "dataset CSV (required)"),
        "m": (_ints, [1], "split counts, comma separated"),
        "n_max": (int, 14, "exact-oracle size cap"),
    },
    "model-posterior": {
        "data": (str, None, "dataset CSV (required)"),
        "nu": (str, "geometric:0.5", "split-count prior"),
        "m_max": (int, 12, "truncation of the posterior table"),
        "source": (str, "exact", "'exact' or 'mc'"),
        "samples": (int, 10_000, "Monte Carlo samples per m when source=mc"),
    },
    "zone-scan": {
        "function": (str, None, "truth function JSON file"),
        "const": (float, None, "constant truth level"),
        "step": (str, None, "two-level step truth 'b:left:right'"),
        "n": (int, 4000, "sample size"),
        "m_list": (_ints, [10, 20, 40], "split counts to scan"),
        "samples": (int, 10_000, "Monte Carlo samples per m"),
        "per_u": (int, 10, "random split vectors compared per m"),
    },
    "psi": {
        "p": (float, 0.8, "constant truth level"),
        "alphas": (_floats, [0.5, 1.0, 2.0], "split intensities"),
        "n": (int, 2000, "base sample size"),
        "replicates": (int, 20, "outer replicates"),
        "inner_samples": (int, 100, "Monte Carlo samples per replicate"),
    },
    "end-zone": {
        "function": (str, None, "truth function JSON file"),
        "const": (float, None, "constant truth level"),
        "step": (str, None, "two-level step truth 'b:left:right'"),
        "alphas": (_floats, [0.5, 1.0, 2.0], "split intensities"),
        "n": (int, 2000, "base sample size"),
        "replicates": (int, 20, "outer replicates"),
        "inner_samples": (int, 100, "Monte Carlo samples per replicate"),
    },
    "badset": {
        "data": (str, None, "dataset CSV (required)"),
        "function": (str, None, "truth function JSON file"),
        "const": (float, None, "constant truth level"),
        "step": (str, None, "two-level step truth 'b:left:right'"),
        "epsilon": (float, 0.3, "relative count discrepancy threshold"),
        "kappa": (float, 50.0, "minimum interval length in units of 1/n"),
    },
    "urn-terms": {
        "p": (float, 0.8, "Bernoulli sampling level"),
        "r": (float, 0.5, "urn reset probability"),
        "k_list": (_ints, [5, 10, 20], "prefix lengths"),
        "replicates": (int, 10_000, "Monte Carlo replicates per k"),
    },
    "urn-mixing": {
        "r": (float, 0.5, "urn reset probability"),
        "m": (int, 6, "block length / skip length"),
        "prefixes": (str, "1,11,111", "comma-separated 0/1 prefixes"),
    },
    "entropy": {
        "function": (str, None, "function JSON file"),
        "const": (float, None, "constant level"),
        "step": (str, None, "two-level step truth 'b:left:right'"),
    },
}


@dataclass
class RunConfig:
    """Resolved invocation: subcommand, parameter map, seed, output path."""

    subcommand: str
    params: dict
    seed: int = 0
    out: str | None = None
    plot: bool = True

    def echo(self) -> dict:
        cfg = {"subcommand": self.subcommand, "seed": self.seed}
        for key, value in self.params.items():
            cfg[key] = ",".join(map(str, value)) if isinstance(value, list) else value
        return cfg


def _parse_nu(text: str) -> HierarchyPrior:
    kind, _, rest = text.partition(":")
    try:
        if kind == "geometric":
            return HierarchyPrior.geometric(float(rest))
        if kind == "poisson":
            return HierarchyPrior.poisson(float(rest))
        if kind == "table":
            return HierarchyPrior.table(_floats(rest))
    except ValueError as exc:
        raise CliError(f"bad prior {text!r}: {exc}") from None
    raise CliError(f"unknown prior kind {kind!r} (use geometric:th, poisson:lam, table:w0,w1,...)")


def _load_truth(params: dict, required: bool = True):
    given = [key for key in ("function", "const", "step") if params.get(key) is not None]
    if len(given) > 1:
        raise CliError("give only one of --function / --const / --step")
    if not given:
        if required:
            raise CliError("a truth function is required (--function, --const, or --step)")
        return None
    if given[0] == "const":
        return StepFunction.constant(params["const"])
    if given[0] == "step":
        try:
            b, left, right = (float(tok) for tok in params["step"].split(":"))
        except ValueError:
            raise CliError("--step wants 'breakpoint:left_level:right_level'") from None
        return StepFunction((b,), (left, right))
    path = Path(params["function"])
    if not path.exists():
        raise CliError(f"function file not found: {path}")
    try:
        return function_from_json_obj(json.loads(path.read_text()))
    except (json.JSONDecodeError, ValueError) as exc:
        raise CliError(f"bad function file {path}: {exc}") from None


def _load_data(params: dict) -> DataSet:
    path = params.get("data")
    if not path:
        raise CliError("--data is required")
    try:
        return load_dataset_csv(path)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None


def _figure_path(out: str) -> Path:
    return Path(out).with_suffix(".png")


def _emit_csv(config: RunConfig, fieldnames, rows) -> None:
    write_csv(config.out, fieldnames, rows, config_lines(config.echo(), stepreg.__version__))


# -- subcommand implementations ---------------------------------------------

def _cmd_simulate(config: RunConfig) -> None:
    truth = _load_truth(config.params)
    data = sample_dataset(truth, config.params["n"], rng_from(config.seed, "simulate"))
    if not config.out:
        raise CliError("--out is required for simulate")
    save_dataset_csv(data, config.out, config_lines(config.echo(), stepreg.__version__))
    if config.plot:
        plots.save_dataset_plot(_figure_path(config.out), data, truth)


def _cmd_fit(config: RunConfig) -> None:
    params = config.params
    data = _load_data(params)
    nu = _parse_nu(params["nu"])
    chain = ChainConfig(
        n_iters=params["iters"],
        burn_in=params["burn_in"],
        thin=params["thin"],
        tuning=TuningParams(move_width=params["move_width"]),
    )
    estimate = posterior_mean(data, nu, chain, params["grid_k"], rng_from(config.seed, "fit"))
    truth = function_from_json_obj(json.loads(Path(params["truth"]).read_text())) if params.get("truth") else None
    payload = {
        "config": config.echo(),
        "estimate": function_to_json_obj(estimate),
    }
    if truth is not None:
        payload["l1_to_truth"] = l1_distance(estimate, truth)
        payload["ise_to_truth"] = l2sq_distance(estimate, truth)
        print(f"ise_vs_truth = {payload['ise_to_truth']:.6g}")
        print(f"l1_vs_truth = {payload['l1_to_truth']:.6g}")
    if config.out:
        Path(config.out).write_text(json.dumps(payload, indent=1) + "\n")
        if config.plot:
            plots.save_fit_plot(_figure_path(config.out), estimate, truth, data)


def _cmd_exact_z(config: RunConfig) -> None:
    params = config.params
    data = _load_data(params)
    try:
        values = [(m, exact_log_Z_m(data, m, n_max=params["n_max"])) for m in params["m"]]
    except ValueError as exc:
        raise CliError(str(exc)) from None
    for m, val in values:
        print(f"m={m} log_Z={val:.12g}")
    if config.out:
        _emit_csv(config, ["m", "log_z"], [{"m": m, "log_z": v} for m, v in values])
        if config.plot and len(values) > 1:
            plots.save_exact_z_plot(_figure_path(config.out), [m for m, _ in values], [v for _, v in values])


def _cmd_model_posterior(config: RunConfig) -> None:
    params = config.params
    data = _load_data(params)
    nu = _parse_nu(params["nu"])
    if params["source"] not in ("exact", "mc"):
        raise CliError("source must be 'exact' or 'mc'")
    try:
        post = model_posterior(
            data, nu, params["m_max"], z_source=params["source"], n_samples=params["samples"], seed=config.seed
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    rows = [
        {"m": m, "prob": float(post.probs[m]), "log_weight": float(post.log_weights[m])}
        for m in range(post.m_max + 1)
    ]
    for row in rows:
        print(f"m={row['m']} prob={row['prob']:.6g}")
    print(f"prior_mass_covered = {post.prior_mass:.6g}")
    if config.out:
        _emit_csv(config, ["m", "prob", "log_weight"], rows)
        if config.plot:
            plots.save_model_posterior_plot(_figure_path(config.out), post)


def _cmd_zone_scan(config: RunConfig) -> None:
    params = config.params
    truth = _load_truth(params)
    result = asymptotics.middle_zone_scan(
        truth, params["n"], params["m_list"], params["samples"], config.seed, per_split=params["per_u"]
    )
    rows = [
        {
            "kind": "marginal",
            "n": row.n,
            "m": row.m,
            "rep": "",
            "estimate": row.estimate,
            "std_error": row.std_error,
            "reference": row.reference,
            "margin": row.margin,
        }
        for row in result.rows
    ] + [
        {
            "kind": "per_split",
            "n": row.n,
            "m": row.m,
            "rep": row.rep,
            "estimate": row.estimate,
            "std_error": 0.0,
            "reference": row.reference,
            "margin": row.estimate - row.reference,
        }
        for row in result.per_split_rows
    ]
    for row in result.rows:
        print(f"m={row.m} estimate={row.estimate:.6g} reference={row.reference:.6g}")
    if config.out:
        _emit_csv(config, ["kind", "n", "m", "rep", "estimate", "std_error", "reference", "margin"], rows)
        if config.plot:
            plots.save_zone_scan_plot(_figure_path(config.out), result)


def _cmd_psi(config: RunConfig) -> None:
    params = config.params
    ests = [
        asymptotics.psi_estimate(
            params["p"], alpha, params["n"], params["replicates"], params["inner_samples"],
            rng_from(config.seed, "psi_cli", i),
        )
        for i, alpha in enumerate(params["alphas"])
    ]
    ent = entropy_functional(StepFunction.constant(params["p"]))
    rows = [
        {
            "p": params["p"],
            "alpha": est.alpha,
            "estimate": est.estimate,
            "std_error": est.std_error,
            "reference": -ent,
            "margin": est.estimate + ent,
        }
        for est in ests
    ]
    for row in rows:
        print(f"alpha={row['alpha']} estimate={row['estimate']:.6g} margin={row['margin']:.6g}")
    if config.out:
        _emit_csv(config, ["p", "alpha", "estimate", "std_error", "reference", "margin"], rows)
        if config.plot:
            plots.save_psi_plot(_figure_path(config.out), ests)


def _cmd_end_zone(config: RunConfig) -> None:
    params = config.params
    truth = _load_truth(params)
    report = asymptotics.end_zone_dominance(
        truth, params["alphas"], params["n"], config.seed,
        replicates=params["replicates"], inner_samples=params["inner_samples"],
    )
    if report.half_truth_warning:
        print("warning: truth is identically 1/2; no strict margin expected", file=sys.stderr)
    rows = [
        {
            "alpha": row.alpha,
            "estimate": row.estimate,
            "std_error": row.std_error,
            "reference": -row.entropy,
            "margin": row.margin,
        }
        for row in report.rows
    ]
    for row in rows:
        print(f"alpha={row['alpha']} estimate={row['estimate']:.6g} margin={row['margin']:.6g}")
    if config.out:
        _emit_csv(config, ["alpha", "estimate", "std_error", "reference", "margin"], rows)
        if config.plot:
            plots.save_end_zone_plot(_figure_path(config.out), report)


def _cmd_badset(config: RunConfig) -> None:
    params = config.params
    data = _load_data(params)
    truth = _load_truth(params)
    report = asymptotics.badset_measure(data, truth, params["epsilon"], params["kappa"])
    print(f"measure = {report.measure:.6g} witnesses = {len(report.witnesses)}")
    if config.out:
        rows = [{"start": a, "end": b} for a, b in report.witnesses]
        header = config_lines(config.echo(), stepreg.__version__) + [f"measure = {report.measure!r}"]
        write_csv(config.out, ["start", "end"], rows, header)
        if config.plot:
            plots.save_badset_plot(_figure_path(config.out), report, data)


def _cmd_urn_terms(config: RunConfig) -> None:
    params = config.params
    rows_obj = urn.relative_entropy_terms(
        params["p"], params["r"], params["k_list"], params["replicates"], config.seed
    )
    rows = [
        {
            "k": row.k,
            "mean": row.mean,
            "std_error": row.std_error,
            "replicates": row.replicates,
            "init_discrepancy_bound": row.init_discrepancy_bound,
        }
        for row in rows_obj
    ]
    for row in rows:
        print(f"k={row['k']} mean={row['mean']:.6g} se={row['std_error']:.3g}")
    if config.out:
        _emit_csv(config, ["k", "mean", "std_error", "replicates", "init_discrepancy_bound"], rows)
        if config.plot:
            plots.save_urn_terms_plot(_figure_path(config.out), rows_obj)


def _cmd_urn_mixing(config: RunConfig) -> None:
    params = config.params
    prefixes = []
    for tok in params["prefixes"].split(","):
        tok = tok.strip()
        if tok and not set(tok) <= {"0", "1"}:
            raise CliError(f"prefixes must be 0/1 strings, got {tok!r}")
        prefixes.append(tuple(int(c) for c in tok))
    rows_obj = urn.mixing_distance(params["m"], params["r"], prefixes)
    rows = [
        {
            "prefix": "".join(map(str, row.prefix)),
            "m": row.m,
            "tv": row.tv,
            "no_recharge_bound": row.no_recharge_bound,
        }
        for row in rows_obj
    ]
    for row in rows:
        print(f"prefix={row['prefix'] or '(empty)'} tv={row['tv']:.6g}")
    if config.out:
        _emit_csv(config, ["prefix", "m", "tv", "no_recharge_bound"], rows)
        if config.plot:
            plots.save_mixing_plot(_figure_path(config.out), rows_obj)


def _cmd_entropy(config: RunConfig) -> None:
    truth = _load_truth(config.params)
    value = entropy_functional(truth)
    print(f"H = {value:.12g}")
    if config.out:
        _emit_csv(config, ["entropy"], [{"entropy": value}])
        if config.plot:
            plots.save_function_plot(_figure_path(config.out), truth)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "exact-z": _cmd_exact_z,
    "model-posterior": _cmd_model_posterior,
    "zone-scan": _cmd_zone_scan,
    "psi": _cmd_psi,
    "end-zone": _cmd_end_zone,
    "badset": _cmd_badset,
    "urn-terms": _cmd_urn_terms,
    "urn-mixing": _cmd_urn_mixing,
    "entropy": _cmd_entropy,
}


def run(config: RunConfig) -> int:
    """Dispatch a resolved run configuration; returns the exit status."""
    if config.subcommand not in _COMMANDS:
        raise CliError(f"unknown subcommand {config.subcommand!r}")
    schema = _SCHEMAS[config.subcommand]
    unknown = set(config.params) - set(schema)
    if unknown:
        raise CliError(f"unknown parameter(s) for {config.subcommand}: {', '.join(sorted(unknown))}")
    for key, (_, default, _h) in schema.items():
        config.params.setdefault(key, default)
    _COMMANDS[config.subcommand](config)
    return 0


def _read_config_file(path: str, schema: dict) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise CliError(f"{path}: line {lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        if key not in schema:
            raise CliError(f"{path}: line {lineno}: unknown key {key!r}")
        parser = schema[key][0]
        try:
            values[key] = parser(value.strip())
        except ValueError:
            raise CliError(f"{path}: line {lineno}: bad value for {key!r}") from None
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stepreg", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in _SCHEMAS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
        sp.add_argument("--out", type=str, default=None, help="output file path")
        sp.add_argument("--config", type=str, default=None, help="key = value config file")
        sp.add_argument("--no-plot", action="store_true", help="skip figure rendering")
        for key, (parser_fn, default, help_text) in schema.items():
            sp.add_argument(
                f"--{key.replace('_', '-')}",
                dest=f"param_{key}",
                type=parser_fn,
                default=None,
                help=f"{help_text} (default {default})",
            )
    return parser


def main(argv=None) -> int:
    try:
        ns = _build_parser().parse_args(argv)
        schema = _SCHEMAS[ns.subcommand]
        params = _read_config_file(ns.config, schema) if ns.config else {}
        for key in schema:
            flag_val = getattr(ns, f"param_{key}")
            if flag_val is not None:
                params[key] = flag_val
        config = RunConfig(
            subcommand=ns.subcommand,
            params=params,
            seed=ns.seed,
            out=ns.out,
            plot=not ns.no_plot,
        )
        return run(config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
