"""
Command-line surface: every figure's underlying data as CSV.

    python app.py envelope   --config config/figures.ini --out envelope.csv
    python app.py bias       --config config/figures.ini
    python app.py compare-vc --config config/figures.ini
    python app.py simulate   --config config/figures.ini --threads 8 --seed 1
    python app.py confidence --config config/figures.ini --threads 8

Exit codes: 0 success, 1 other failure, 2 invalid configuration, 3 domain error.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .asymptotics import max_admissible_e0_psi_bar, max_bias_asymptotic, max_bias_psi_bar
from .confidence import build_estimating_function, coverage_check, simulate_pairs, validate_coverage
from .config_service import (
    BiasConfig,
    CommandConfig,
    CompareVcConfig,
    ConfidenceConfig,
    EnvelopeConfig,
    SimulateConfig,
    load_config,
    resolve_output,
)
from .errors import ConfigError, DomainError, RiskBiasError
from .exact_bias import attainable_range, cell_curve, envelope_value, max_bias_exact
from .logging_handler import configure_logging
from .models import ModelFamily, ProblemSize, VcSetting
from .simulation import mc_bias_curve
from .vc_bound import solve_vc

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12g'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3


@dataclass
class CsvOutput:
    """One CSV file: data frame plus notes for the trailing metadata block."""

    path: Path
    frame: pd.DataFrame
    notes: list[str] = field(default_factory=list)


def render_csv(output: CsvOutput, command: str, config: CommandConfig) -> str:
    text = output.frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    footer = [
        f"# riskbias {__version__}",
        f"# command: {command}",
        f"# seed: {config.seed}",
        f"# config: {config.model_dump_json(exclude={'threads'})}",
    ]
    footer.extend(f"# {note}" for note in output.notes)
    return text + "\n".join(footer) + "\n"


def write_outputs(outputs: Sequence[CsvOutput], command: str, config: CommandConfig) -> None:
    for output in outputs:
        output.path.parent.mkdir(parents=True, exist_ok=True)
        output.path.write_text(render_csv(output, command, config), encoding='utf-8')
        logger.info(f"Wrote {len(output.frame)} rows to {output.path}")


# ============================================================================
# Commands
# ============================================================================

def cmd_envelope(config: EnvelopeConfig) -> list[CsvOutput]:
    """Per-cell curves (k mu_s against k mu_r_tilde) with the envelope at each z."""
    size = ProblemSize(N=config.N, k=config.k)
    p_grid = np.linspace(0.0, 0.5, config.p_points)
    rows = []
    for k_alpha in config.k_alpha:
        alpha = min(max(k_alpha / size.k, 1.0 / size.N), 1.0 / size.k)
        for point in cell_curve(alpha, size, p_grid).points:
            try:
                zeta = envelope_value(point.empirical_risk, size)
            except DomainError as e:
                raise DomainError(f"curve k*alpha={k_alpha}: {e}", e.lower, e.upper) from e
            rows.append({
                "alpha": alpha, "z": point.empirical_risk, "k_mu_s": point.bias, "envelope": zeta,
            })
    frame = pd.DataFrame(rows, columns=["alpha", "z", "k_mu_s", "envelope"])
    return [CsvOutput(path=resolve_output(config.out, "envelope"), frame=frame)]


def cmd_bias(config: BiasConfig) -> list[CsvOutput]:
    """Exact, asymptotic and closed-form maximal bias for each M; rows outside any domain are omitted."""
    rows = []
    omitted = 0
    for M in config.M:
        size = ProblemSize(N=M * config.k, k=config.k)
        for e0 in np.linspace(0.0, config.e0_max, config.e0_points):
            e0 = float(e0)
            try:
                row = {
                    "M": M,
                    "e0": e0,
                    "bias_exact": max_bias_exact(e0, size).bias,
                    "bias_psi": max_bias_asymptotic(e0, M),
                    "bias_psibar": max_bias_psi_bar(e0, M),
                }
            except DomainError as e:
                logger.debug(f"M={M} e0={e0:.6g} omitted: {e}")
                omitted += 1
                continue
            rows.append(row)
    if omitted:
        logger.warning(f"{omitted} rows outside the admissible domain were omitted")
    frame = pd.DataFrame(rows, columns=["M", "e0", "bias_exact", "bias_psi", "bias_psibar"])
    return [CsvOutput(path=resolve_output(config.out, "bias"), frame=frame, notes=[f"omitted rows: {omitted}"])]


def cmd_compare_vc(config: CompareVcConfig) -> list[CsvOutput]:
    """VC-type estimate against the exact maximal bias over the attainable empirical risks."""
    size = ProblemSize(N=config.N, k=config.k)
    setting = VcSetting.for_histogram(size)
    lower, upper = attainable_range(size)
    rows = []
    saturated = 0
    for e0 in np.linspace(lower, upper, config.e0_points):
        e0 = float(e0)
        solution = solve_vc(e0, setting)
        saturated += solution.saturated
        rows.append({"e0": e0, "s_vc": solution.risk - e0, "s_exact": max_bias_exact(e0, size).bias})
    frame = pd.DataFrame(rows, columns=["e0", "s_vc", "s_exact"])
    return [CsvOutput(path=resolve_output(config.out, "compare-vc"), frame=frame, notes=[f"saturated VC rows: {saturated}"])]


def analytic_bias(e0: float, M: float) -> float:
    """Closed-form maximal bias at relative sample size M; NaN where e0 is outside its domain."""
    if not 0.0 <= e0 <= max_admissible_e0_psi_bar(M):
        return float('nan')
    return max_bias_psi_bar(e0, M)


def cmd_simulate(config: SimulateConfig) -> list[CsvOutput]:
    """Simulated bias curves of greedy trees on the continuous model families, with the analytic curve."""
    rows = []
    for variant in config.families:
        family = ModelFamily(
            variant=variant, dim=config.dim, theta0=config.theta0,
            n_g1=config.n_g1, n_theta=config.n_theta, n_members=config.n_members,
        )
        curve = mc_bias_curve(family, config.N, config.max_leaves, config.reps, config.seed, config.threads)
        for point in curve.points:
            rows.append({
                "family": variant,
                "param": point.param,
                "param_name": point.param_name,
                "mean_e": point.empirical_risk,
                "mean_r": point.expected_risk,
                "bias": point.bias,
                "se_e": point.se_empirical,
                "se_r": point.se_risk,
                "se_bias": point.se_bias,
                "reps": point.reps,
                "analytic_bias": analytic_bias(point.empirical_risk, config.compare_M),
            })
    columns = [
        "family", "param", "param_name", "mean_e", "mean_r", "bias",
        "se_e", "se_r", "se_bias", "reps", "analytic_bias",
    ]
    frame = pd.DataFrame(rows, columns=columns)
    outside = int(frame["analytic_bias"].isna().sum())
    notes = [f"analytic curve: closed-form maximal bias at M={config.compare_M:g}",
             f"rows outside the analytic domain: {outside}"]
    return [CsvOutput(path=resolve_output(config.out, "simulate"), frame=frame, notes=notes)]


def coverage_path(out: Path) -> Path:
    return out.with_name(f"{out.stem}_coverage.csv")


def cmd_confidence(config: ConfidenceConfig) -> list[CsvOutput]:
    """Fit an estimating function, then report its coverage on the fit runs and on fresh runs."""
    family = ModelFamily(variant="confidence", dim=config.dim, n_members=config.n_members)
    pairs = simulate_pairs(
        family, config.N, config.max_leaves, config.reps, config.functional, config.seed, config.threads,
    )
    fn = build_estimating_function(
        pairs, config.eta, n_bins=config.n_bins, n_levels=config.n_levels, guard=config.guard,
    )
    reports = {
        "fit": coverage_check(fn, pairs),
        "validate": validate_coverage(
            fn, family, config.N, config.max_leaves, config.validate_reps,
            config.functional, config.seed, config.threads,
        ),
    }

    function_frame = pd.DataFrame({"u": fn.breakpoints, "r_hat": fn.values})
    rows = [
        {"param": m.param, "coverage": m.coverage, "se": m.se, "reps": m.reps, "split": split}
        for split, report in reports.items()
        for m in report.members
    ]
    coverage_frame = pd.DataFrame(rows, columns=["param", "coverage", "se", "reps", "split"])
    out = resolve_output(config.out, "confidence")
    notes = [f"min {split} coverage: {report.min_coverage:.6g}" for split, report in reports.items()]
    return [
        CsvOutput(path=out, frame=function_frame),
        CsvOutput(path=coverage_path(out), frame=coverage_frame, notes=notes),
    ]


COMMANDS: dict[str, Callable[..., list[CsvOutput]]] = {
    "envelope": cmd_envelope,
    "bias": cmd_bias,
    "compare-vc": cmd_compare_vc,
    "simulate": cmd_simulate,
    "confidence": cmd_confidence,
}


# ============================================================================
# Entry point
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskbias",
        description="Bias of empirical risk for histogram classifiers and greedy trees",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=(COMMANDS[name].__doc__ or "").split("\n")[0])
        sub.add_argument('--config', type=Path, default=None, help=f'INI file with a [{name}] section')
        sub.add_argument('--seed', type=int, default=None, help='Root seed (unsigned 64-bit)')
        sub.add_argument('--out', type=Path, default=None, help='Output CSV path')
        sub.add_argument('--threads', type=int, default=None, help='Worker threads')
        sub.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging('DEBUG' if args.verbose else None)

    try:
        config = load_config(
            args.command, args.config,
            overrides={"seed": args.seed, "out": args.out, "threads": args.threads},
        )
        logger.info(f"Running {args.command} (seed={config.seed}, threads={config.threads})")
        outputs = COMMANDS[args.command](config)
        write_outputs(outputs, args.command, config)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except DomainError as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_DOMAIN
    except RiskBiasError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_FAILURE

    logger.info(f"{args.command} finished")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
