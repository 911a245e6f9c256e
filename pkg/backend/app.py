"""
CovertLink command-line front end
Experiment sweeps, figure data, bound evaluation and capacity reports
"""

import argparse
import logging
import math
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd
import psutil
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

# Setup logging format once; main() picks the level
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
logger = logging.getLogger(__name__)

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from covert_models.channel_model import (  # noqa: E402
    CHANNEL_KEYS,
    ChannelParams,
    CovertBudget,
    PpmSession,
    RunConfig,
    load_run_config,
)
from covert_models.errors import ConfigError, CovertError, SessionGeometryError  # noqa: E402
from covert_models.ppm_link import dmc_capacity, erasure_probability, max_throughput  # noqa: E402
from covert_models.simulator import (  # noqa: E402
    EXPERIMENT_STYLE_TRIALS,
    FULL_SCALE_TRIALS,
    ExperimentConfig,
    Regime,
    regime_zeta,
    run_experiment,
    transmitted_sequence,
)
from covert_models import theory_bounds as tb  # noqa: E402
from covert_models.willie_detector import dkw_halfwidth, gaussian_pe, spd_error_bounds  # noqa: E402

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

FLOAT_FORMAT = "%.10g"
WILLIE_COLUMNS = ["n", "Q", "zeta", "regime", "pe_hat", "pe_mc", "pe_gauss", "xi_exp", "xi_mc"]
BOB_COLUMNS = ["n", "Q", "zeta", "regime", "bits_mean", "max_throughput", "ser"]
SIMULATE_COLUMNS = [
    "n", "Q", "zeta", "regime", "m", "pe_hat", "xi", "pe_gauss", "bob_bits_mean", "max_throughput", "ser",
]


def default_workers() -> int:
    return psutil.cpu_count(logical=False) or 1


class SweepSpec(BaseModel):
    """Sweep points for one command: n values, regimes, channel overrides, output path"""

    model_config = ConfigDict(frozen=True)

    n_values: List[int]
    regimes: List[Regime]
    Q: int = 32
    overrides: Dict[str, float] = Field(default_factory=dict)
    out: Optional[str] = None

    @model_validator(mode="after")
    def _check_points(self) -> "SweepSpec":
        if not self.n_values:
            raise ConfigError("the sweep has no n values; set n in the config", code="EMPTY_SWEEP")
        if not self.regimes:
            raise ConfigError("the sweep has no regimes", code="EMPTY_SWEEP")
        for n in self.n_values:
            if n < 1 or n % self.Q != 0:
                raise SessionGeometryError(f"Q={self.Q} does not divide n={n}", code="Q_NOT_DIVIDING_N")
        unknown = set(self.overrides) - set(CHANNEL_KEYS)
        if unknown:
            raise ConfigError(f"unknown channel override(s): {', '.join(sorted(unknown))}", code="UNKNOWN_KEY")
        return self

    @classmethod
    def from_run_config(
        cls, cfg: RunConfig, regimes: Optional[Sequence[str]] = None, out: Optional[str] = None
    ) -> "SweepSpec":
        overrides = {k: getattr(cfg, k) for k in CHANNEL_KEYS if getattr(cfg, k) is not None}
        return cls(
            n_values=list(cfg.n),
            regimes=[Regime(r) for r in (regimes or [cfg.regime])],
            Q=cfg.Q,
            overrides=overrides,
            out=out,
        )


# Shared helpers

def _parse_regimes(raw: Optional[str]) -> Optional[List[str]]:
    if not raw:
        return None
    regimes = [r.strip() for r in raw.split(",") if r.strip()]
    for r in regimes:
        if r not in {x.value for x in Regime}:
            raise ConfigError(f"unknown regime '{r}'", code="UNKNOWN_REGIME")
    return regimes


def _load_config(args: argparse.Namespace) -> RunConfig:
    overrides = {"seed": args.seed, "trials": args.trials}
    if getattr(args, "paper_scale", False):
        overrides["trials"] = FULL_SCALE_TRIALS
    return load_run_config(args.config, overrides)


def _experiment(
    cfg: RunConfig, n: int, regime: Regime, trials: int, workers: int, decode_bob: bool, seed: int
) -> ExperimentConfig:
    return ExperimentConfig.build(
        n=n,
        regime=regime,
        params=cfg.channel_params(regime.value),
        Q=cfg.Q,
        rs_k=cfg.rs_k,
        zeta=cfg.zeta,
        trials=trials,
        seed=seed,
        detector=cfg.detector,
        click_model=cfg.click_model,
        decode_bob=decode_bob,
        alpha=cfg.alpha,
        workers=workers,
    )


def _emit(frame: pd.DataFrame, out: Optional[str]) -> None:
    if out:
        frame.to_csv(out, index=False, float_format=FLOAT_FORMAT)
        logger.info(f"Wrote {len(frame)} rows to {out}")
    else:
        sys.stdout.write(frame.to_csv(index=False, float_format=FLOAT_FORMAT))


def write_plot_script(path: str, csv_path: str, x: str, series: List[Tuple[str, Optional[str]]], ylabel: str) -> None:
    """Gnuplot stub re-plotting the emitted CSV; series are (column, error-column) pairs"""
    header = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale x",
        f"set xlabel '{x}'",
        f"set ylabel '{ylabel}'",
    ]
    plots = []
    for column, err in series:
        if err:
            plots.append(f"'{csv_path}' using '{x}':'{column}':'{err}' with yerrorlines")
        else:
            plots.append(f"'{csv_path}' using '{x}':'{column}' with linespoints")
    with open(path, "w") as f:
        f.write("\n".join(header) + "\nplot " + ", \\\n     ".join(plots) + "\n")
    logger.info(f"Wrote plotting script {path}")


# Subcommands

def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    sweep = SweepSpec.from_run_config(cfg, _parse_regimes(args.regimes), args.out)
    rows, trial_frames = [], []
    for regime in sweep.regimes:
        for n in sweep.n_values:
            config = _experiment(cfg, n, regime, cfg.trials, args.workers, cfg.decode_bob, cfg.seed)
            outcome = run_experiment(config)
            rows.append(outcome.to_row(config))
            if args.trials_csv:
                frame = outcome.trials_frame()
                frame.insert(0, "n", n)
                frame.insert(1, "regime", regime.value)
                trial_frames.append(frame)
            if args.bitfile and len(rows) == 1:
                sequence, _, _ = transmitted_sequence(config, 0)
                sequence.write_bitfile(args.bitfile)
                logger.info(f"Wrote trial 0 transmission for n={n} to {args.bitfile}")

    _emit(pd.DataFrame(rows, columns=SIMULATE_COLUMNS), sweep.out)
    if trial_frames:
        pd.concat(trial_frames, ignore_index=True).to_csv(args.trials_csv, index=False, float_format=FLOAT_FORMAT)
        logger.info(f"Wrote per-trial records to {args.trials_csv}")
    if args.plot_script:
        write_plot_script(args.plot_script, sweep.out or "simulate.csv", "n", [("pe_hat", "xi")], "P_e")
    return EXIT_OK


def _willie_row(cfg: RunConfig, n: int, regime: Regime, workers: int) -> Dict[str, Any]:
    experiment = run_experiment(
        _experiment(cfg, n, regime, EXPERIMENT_STYLE_TRIALS, workers, False, cfg.seed)
    )
    config = _experiment(cfg, n, regime, cfg.trials, workers, False, cfg.seed + 1)
    mc = run_experiment(config)
    return {
        "n": n,
        "Q": cfg.Q,
        "zeta": config.session.zeta,
        "regime": regime.value,
        "pe_hat": experiment.detection.pe_hat,
        "pe_mc": mc.detection.pe_hat,
        "pe_gauss": mc.pe_gauss,
        "xi_exp": experiment.detection.dkw_halfwidth,
        "xi_mc": mc.detection.dkw_halfwidth,
    }


def _bob_row(cfg: RunConfig, n: int, regime: Regime, workers: int) -> Dict[str, Any]:
    config = _experiment(cfg, n, regime, cfg.trials, workers, True, cfg.seed)
    outcome = run_experiment(config)
    return {
        "n": n,
        "Q": cfg.Q,
        "zeta": config.session.zeta,
        "regime": regime.value,
        "bits_mean": outcome.throughput.bits_mean,
        "max_throughput": outcome.throughput.max_throughput,
        "ser": outcome.throughput.ser,
    }


def cmd_figure_data(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    default = [r.value for r in Regime if r is not Regime.EXPLICIT] if args.figure == "willie" else None
    sweep = SweepSpec.from_run_config(cfg, _parse_regimes(args.regimes) or default, args.out)
    make_row, columns = (_willie_row, WILLIE_COLUMNS) if args.figure == "willie" else (_bob_row, BOB_COLUMNS)
    rows = [make_row(cfg, n, regime, args.workers) for regime in sweep.regimes for n in sweep.n_values]
    _emit(pd.DataFrame(rows, columns=columns), sweep.out)

    if args.plot_script:
        csv_path = sweep.out or f"{args.figure}.csv"
        if args.figure == "willie":
            series = [("pe_hat", "xi_exp"), ("pe_mc", "xi_mc"), ("pe_gauss", None)]
            write_plot_script(args.plot_script, csv_path, "n", series, "P_e")
        else:
            series = [("bits_mean", None), ("max_throughput", None)]
            write_plot_script(args.plot_script, csv_path, "n", series, "bits")
    return EXIT_OK


def cmd_capacity(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    sweep = SweepSpec.from_run_config(cfg, _parse_regimes(args.regimes), args.out)
    rows = []
    for regime in sweep.regimes:
        params = cfg.channel_params(regime.value)
        C_s = dmc_capacity(cfg.Q, params.p_D_b, params.nbar_det_b)
        for n in sweep.n_values:
            session = PpmSession.for_code(n=n, Q=cfg.Q, zeta=regime_zeta(regime, n, cfg.Q, cfg.zeta), rs_k=cfg.rs_k)
            rows.append({
                "n": n,
                "Q": cfg.Q,
                "zeta": session.zeta,
                "regime": regime.value,
                "capacity_bits": C_s,
                "erasure_prob": erasure_probability(cfg.Q, params.p_D_b, params.nbar_det_b),
                "max_throughput": max_throughput(C_s, session.zeta, n, cfg.Q),
            })
    _emit(pd.DataFrame(rows), sweep.out)
    return EXIT_OK


# Bounds

class BoundInputs:
    """Named numeric inputs for a bound: config-derived defaults overlaid with key=value arguments"""

    def __init__(self, values: Dict[str, float]):
        self.values = values

    def f(self, key: str) -> float:
        if key not in self.values or self.values[key] is None:
            raise ConfigError(f"bound needs '{key}'; pass {key}=<value>", code="MISSING_KEY")
        return float(self.values[key])

    def i(self, key: str) -> int:
        value = self.f(key)
        if not value.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {value}", code="BAD_VALUE")
        return int(value)

    def get(self, key: str, default: Optional[float] = None) -> Optional[float]:
        value = self.values.get(key)
        return default if value is None else float(value)

    @classmethod
    def from_config(cls, cfg: RunConfig, arguments: Sequence[str]) -> "BoundInputs":
        overrides: Dict[str, float] = {}
        for item in arguments:
            if "=" not in item:
                raise ConfigError(f"expected key=value, got '{item}'", code="MALFORMED_LINE")
            key, raw = (part.strip() for part in item.split("=", 1))
            try:
                overrides[key] = float(raw)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got '{raw}'", code="BAD_VALUE")

        channel = {k: overrides.pop(k) for k in list(overrides) if k in ChannelParams.model_fields}
        params = cfg.channel_params().with_overrides(**channel)
        values: Dict[str, Any] = params.model_dump()
        if values["lambda_w"] == 0 and params.p_D_w > 0:
            values["lambda_w"] = -math.log1p(-params.p_D_w)
        n = cfg.n[0] if cfg.n else None
        values.update({
            "n": n,
            "Q": cfg.Q,
            "seed": cfg.seed,
            "alpha": cfg.alpha,
            "epsilon": 0.05,
            "delta": 0.05,
            "s_w": params.nbar_det_w,
            "s_b": params.nbar_det_b,
            "rs_k": cfg.rs_k,
        })
        values.update(overrides)
        if values.get("zeta") is None and cfg.zeta is not None:
            values["zeta"] = cfg.zeta
        if values.get("zeta") is None and values.get("n") and cfg.regime != "explicit":
            values["zeta"] = regime_zeta(Regime(cfg.regime), int(values["n"]), int(values["Q"]), cfg.zeta)
        return cls(values)


Lines = List[Tuple[str, Any]]


def _bound_lines(prefix: str, bound: tb.ClampedBound) -> Lines:
    return [(prefix, bound.value), (f"{prefix}.raw", bound.raw)]


def bound_qre_thermal(x: BoundInputs) -> Lines:
    return [("qre_thermal", tb.qre_thermal(x.f("nbar0"), x.f("nbar1")))]


def bound_thermal_willie(x: BoundInputs) -> Lines:
    args = (x.i("n"), x.f("nbar"), x.f("eta_b"), x.f("eta_w"), x.f("nbar_T"))
    return (
        _bound_lines("thermal_willie_bound", tb.thermal_willie_bound(*args))
        + _bound_lines("thermal_willie_bound_exact", tb.thermal_willie_bound_exact(*args))
    )


def bound_covert_nbar(x: BoundInputs) -> Lines:
    n, epsilon = x.i("n"), x.f("epsilon")
    nbar = tb.covert_nbar(n, epsilon, x.f("eta_b"), x.f("eta_w"), x.f("nbar_T"))
    check = tb.thermal_willie_bound(n, nbar, x.f("eta_b"), x.f("eta_w"), x.f("nbar_T"))
    return [("covert_nbar", nbar), ("thermal_willie_bound", check.value), ("half_minus_epsilon", 0.5 - epsilon)]


def bound_homodyne(x: BoundInputs) -> Lines:
    lines = [("homodyne_noise_power", tb.homodyne_noise_power(x.f("eta_b"), x.f("nbar_T")))]
    if x.get("B") is not None:
        bound = tb.homodyne_reliability_bound(x.f("B"), x.i("n"), x.f("nbar"), x.f("eta_b"), x.f("nbar_T"))
        lines += _bound_lines("homodyne_reliability_bound", bound)
    budget = CovertBudget(epsilon=x.f("epsilon"), delta=x.f("delta"))
    bits = tb.homodyne_covert_bits(x.i("n"), budget, x.f("eta_b"), x.f("eta_w"), x.f("nbar_T"))
    return lines + [("homodyne_covert_bits", bits)]


def bound_ook_kl(x: BoundInputs) -> Lines:
    estimate = tb.ook_kl(x.f("q"), x.f("s_w"), x.f("lambda_w"))
    return [("ook_kl.exact", estimate.exact), ("ook_kl.taylor_ub", estimate.taylor_ub)]


def bound_ook_q_setting(x: BoundInputs) -> Lines:
    n, epsilon = x.i("n"), x.f("epsilon")
    q = tb.ook_q_setting(n, epsilon, x.f("s_w"), x.f("lambda_w"))
    check = tb.ook_willie_bound(n, q, x.f("s_w"), x.f("lambda_w"))
    return [("ook_q_setting", q), ("ook_willie_bound", check.value), ("half_minus_epsilon", 0.5 - epsilon)]


def bound_ook_exponent(x: BoundInputs) -> Lines:
    exponent = tb.ook_error_exponent(x.f("q"), x.f("p_D_b"), x.f("s_b"))
    lines = [("ook_error_exponent.E0", exponent.E0), ("ook_error_exponent.C", exponent.C)]
    if x.get("B") is not None:
        lines += _bound_lines("ook_bob_error_bound", tb.ook_bob_error_bound(x.f("B"), x.i("n"), exponent.E0))
    return lines


def bound_ppm_kl(x: BoundInputs) -> Lines:
    K = x.get("K")
    cutoff = int(K) if K is not None else None
    args = (x.get("zeta", 1.0), x.i("Q"), x.f("s_w"), x.f("lambda_w"))
    lines: Lines = []
    if x.i("Q") <= tb.PPM_EXACT_MAX_Q:
        exact = tb.ppm_kl(*args, cutoff_K=cutoff, method="exact")
        lines += [("ppm_kl.exact", exact.value), ("ppm_kl.cutoff_K", exact.cutoff_K)]
    mc = tb.ppm_kl(*args, method="mc", samples=int(x.get("samples", 10 ** 6)), seed=x.i("seed"))
    lines += [("ppm_kl.mc", mc.value), ("ppm_kl.mc_stderr", mc.stderr), ("ppm_kl.taylor_ub", mc.taylor_ub)]
    return lines


def bound_ppm_zeta_setting(x: BoundInputs) -> Lines:
    n, Q, epsilon = x.i("n"), x.i("Q"), x.f("epsilon")
    setting = tb.ppm_zeta_setting(n, Q, epsilon, x.f("s_w"), x.f("lambda_w"))
    check = tb.ppm_willie_bound(n, Q, setting.zeta, x.f("s_w"), x.f("lambda_w"))
    return [
        ("ppm_zeta_setting", setting.zeta),
        ("ppm_zeta_setting.raw", setting.raw),
        ("ppm_zeta_setting.clamped", setting.clamped),
        ("ppm_willie_bound", check.value),
        ("half_minus_epsilon", 0.5 - epsilon),
    ]


def bound_ppm_willie(x: BoundInputs) -> Lines:
    return _bound_lines(
        "ppm_willie_bound", tb.ppm_willie_bound(x.i("n"), x.i("Q"), x.f("zeta"), x.f("s_w"), x.f("lambda_w"))
    )


def bound_pureloss(x: BoundInputs) -> Lines:
    result = tb.pureloss_bounds(tb.PureLossInput(
        eta_w=x.f("eta_w"), epsilon=x.f("epsilon"), avg_vacuum_overlap=x.get("avg_vacuum_overlap", 1.0),
    ))
    return [(f"pureloss.{name}", value) for name, value in result._asdict().items()]


def bound_converse(x: BoundInputs) -> Lines:
    params = ChannelParams(
        eta_b=x.f("eta_b"), eta_w=x.f("eta_w"), nbar_T=x.f("nbar_T"), lambda_w=x.f("lambda_w"),
    )
    data = tb.ConverseInput.from_channel(
        params,
        x.i("n"),
        p_fa_target=x.f("p_fa"),
        nbar_u=x.f("nbar_u"),
        sigma2_u=x.get("sigma2_u", 0.0),
        M=x.f("M"),
        kappa=x.get("kappa", 1.0),
        nbar_U=x.f("nbar_U"),
    )
    return [(f"converse.{name}", value) for name, value in tb.converse_bounds(data)._asdict().items()]


def bound_spd(x: BoundInputs) -> Lines:
    lower, upper = spd_error_bounds(x.f("p_zero"))
    return [("spd_optimal_pe_lb", lower), ("spd_detector_pe", upper)]


def bound_dkw(x: BoundInputs) -> Lines:
    return [("dkw_halfwidth", dkw_halfwidth(x.i("m"), x.f("alpha")))]


def bound_gaussian_pe(x: BoundInputs) -> Lines:
    session = PpmSession.for_code(n=x.i("n"), Q=x.i("Q"), zeta=x.f("zeta"), rs_k=x.i("rs_k"))
    params = ChannelParams(
        eta_b=x.f("eta_b"), eta_w=x.f("eta_w"), p_D_w=x.f("p_D_w"), nbar_det_w=x.f("nbar_det_w"),
    )
    approx = gaussian_pe(session, params)
    return [("gaussian_pe", approx.pe_tilde), ("gaussian_pe.threshold", approx.s_star)]


BOUNDS: Dict[str, Callable[[BoundInputs], Lines]] = {
    "qre_thermal": bound_qre_thermal,
    "thermal_willie_bound": bound_thermal_willie,
    "covert_nbar": bound_covert_nbar,
    "homodyne": bound_homodyne,
    "ook_kl": bound_ook_kl,
    "ook_q_setting": bound_ook_q_setting,
    "ook_error_exponent": bound_ook_exponent,
    "ppm_kl": bound_ppm_kl,
    "ppm_zeta_setting": bound_ppm_zeta_setting,
    "ppm_willie_bound": bound_ppm_willie,
    "pureloss": bound_pureloss,
    "converse": bound_converse,
    "spd_error_bounds": bound_spd,
    "dkw_halfwidth": bound_dkw,
    "gaussian_pe": bound_gaussian_pe,
}


def _format_value(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    return f"{float(value):.12g}"


def cmd_bounds(args: argparse.Namespace) -> int:
    if args.name not in BOUNDS:
        raise ConfigError(
            f"unknown bound '{args.name}', available: {', '.join(sorted(BOUNDS))}", code="UNKNOWN_BOUND"
        )
    cfg = load_run_config(args.config, {"seed": args.seed})
    inputs = BoundInputs.from_config(cfg, args.assignments)
    for name, value in BOUNDS[args.name](inputs):
        print(f"{name}={_format_value(value)}")
    return EXIT_OK


# Entry point

def _add_run_flags(parser: argparse.ArgumentParser, trials: bool = True) -> None:
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    parser.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    parser.add_argument("--regimes", default=None, help="comma-separated regimes to sweep")
    if trials:
        parser.add_argument("--trials", type=int, default=None, help="paired trials per sweep point")
        parser.add_argument("--workers", type=int, default=default_workers(), help="parallel workers")
        parser.add_argument("--paper-scale", action="store_true", help=f"use {FULL_SCALE_TRIALS} trials per point")
        parser.add_argument("--plot-script", default=None, help="also write a gnuplot script for the CSV")
    else:
        parser.set_defaults(trials=None, workers=1, paper_scale=False, plot_script=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covertlink",
        description="Covert optical PPM link: simulation, figure data and covertness bounds",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run experiments for every n in the sweep")
    _add_run_flags(simulate)
    simulate.add_argument("--bitfile", default=None, help="write trial 0's transmitted sequence, byte-packed")
    simulate.add_argument("--trials-csv", default=None, help="write per-trial records to this CSV")
    simulate.set_defaults(handler=cmd_simulate)

    figure = sub.add_parser("figure-data", help="columns needed to re-plot Bob's or Willie's figure")
    figure.add_argument("figure", choices=["bob", "willie"])
    _add_run_flags(figure)
    figure.set_defaults(handler=cmd_figure_data)

    bounds = sub.add_parser("bounds", help="evaluate a named bound and print name=value lines")
    bounds.add_argument("name", help=f"one of: {', '.join(sorted(BOUNDS))}")
    bounds.add_argument("assignments", nargs="*", help="key=value inputs")
    bounds.add_argument("--config", help="key=value configuration file")
    bounds.add_argument("--seed", type=int, default=None)
    bounds.set_defaults(handler=cmd_bounds)

    capacity = sub.add_parser("capacity", help="Bob's PPM capacity and max throughput per sweep point")
    _add_run_flags(capacity, trials=False)
    capacity.set_defaults(handler=cmd_capacity)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)

    try:
        if getattr(args, "workers", 1) < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}", code="BAD_VALUE")
        code = args.handler(args)
    except (ConfigError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CovertError as e:
        logger.error(f"Run failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"Unexpected failure: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    rss = psutil.Process().memory_info().rss / 2 ** 20
    logger.info(f"Finished {args.command}; resident memory {rss:.1f} MiB")
    return code


if __name__ == "__main__":
    sys.exit(main())
