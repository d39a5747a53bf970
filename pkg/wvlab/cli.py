import functools
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from wvlab import __version__
from wvlab.components.inference import (
    efficiency_angle_bound,
    fisher_analytic,
    fisher_fraction_fit,
    summarize_reports,
)
from wvlab.components.optics import (
    MEASURED_FACTORS,
    MEASURED_SLOPES,
    PREDICTED_SLOPES,
    geometric_factor_surface,
    ratio_of_ratios,
    raw_signal_ratios,
    weak_validity,
)
from wvlab.components.timeseries import (
    REFERENCE_RELATIVE_ERRORS,
    REFERENCE_SUPPRESSIONS,
    advantage_factor,
    deviation_curve,
    estimate_repetitions,
    fisher_fraction_sweep,
    jitter_comparison,
    peak_ratio_table,
    ratio_sweep,
    run_timeseries,
    slope_fit_r,
    trace_spectrum,
)
from wvlab.errors import ConfigError, WeakRegimeError, WvLabError
from wvlab.export import write_csv, write_json, write_trace
from wvlab.logging_utils import log_error, log_run, setup_logging
from wvlab.scenario import ResultBundle, Scenario, list_presets, load_scenario
from wvlab.settings import get_settings
from wvlab.units import parse_angle

console = Console()
logger = logging.getLogger("wvlab.cli")

EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_REGIME = 3


@dataclass
class RunContext:
    scenario: Scenario
    out_dir: Path
    threads: int
    strict: bool
    command: str

    @property
    def seed(self) -> int:
        return self.scenario.run.master_seed


def scenario_options(fn):
    """Options shared by every simulation command."""
    fn = click.option("--strict", is_flag=True, help="Fail with exit code 3 outside the weak-interaction regime")(fn)
    fn = click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory")(fn)
    fn = click.option("--seed", type=click.IntRange(min=0), default=None, help="Override the scenario master seed")(fn)
    fn = click.option("--scenario", "scenario_name", required=True, help="Preset name or scenario file")(fn)
    return fn


def handle_errors(fn):
    """Map wvlab errors to exit codes: config 2, strict regime 3, anything else 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        scenario = kwargs.get("scenario_name")
        try:
            return fn(*args, **kwargs)
        except ConfigError as e:
            console.print(f"[red]Configuration error: {e}[/red]")
            log_error(logger, scenario, e)
            sys.exit(EXIT_CONFIG)
        except WeakRegimeError as e:
            console.print(f"[red]Weak-interaction regime violated: {e}[/red]")
            log_error(logger, scenario, e)
            sys.exit(EXIT_REGIME)
        except WvLabError as e:
            console.print(f"[red]Error: {e}[/red]")
            log_error(logger, scenario, e, context={"command": fn.__name__})
            sys.exit(EXIT_FAILURE)

    return wrapper


def _prepare(command: str, scenario_name: str, seed: Optional[int], out_dir: Optional[str], threads: Optional[int], strict: bool) -> RunContext:
    settings = get_settings()
    scenario = load_scenario(scenario_name).with_seed(seed)
    ctx = RunContext(
        scenario=scenario,
        out_dir=Path(out_dir or settings.out_dir),
        threads=threads or settings.threads,
        strict=strict,
        command=command,
    )
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    log_run(logger, scenario.name, ctx.seed, command, ctx.threads)
    return ctx


def _check_regime(ctx: RunContext, scenario: Optional[Scenario] = None) -> None:
    scenario = scenario or ctx.scenario
    validity = weak_validity(scenario.beam, scenario.wv, scenario.drive.amplitude)
    if not validity.valid and ctx.strict:
        raise WeakRegimeError(
            f"k^2 sigma^2 cot^2(phi/2) = {validity.value:.3g} at phi = {scenario.wv.phi:.4g} rad"
        )


def _finish(ctx: RunContext, outputs: Dict[str, Path], summary: dict) -> None:
    bundle = ResultBundle(
        scenario=ctx.scenario.name,
        seed=ctx.seed,
        software_version=__version__,
        command=ctx.command,
        outputs={name: path.relative_to(ctx.out_dir).as_posix() for name, path in outputs.items()},
        summary=summary,
    )
    summary_path = write_json(bundle.model_dump(mode="json"), ctx.out_dir / "summary.json")
    console.print(Panel(f"Results written to [bold]{summary_path.parent}[/bold]", title=f"{ctx.command}: {ctx.scenario.name}"))


def _table(title: str, columns: List[str], rows: List[list]) -> Table:
    table = Table(title=title)
    for column in columns:
        table.add_column(column)
    for row in rows:
        table.add_row(*[f"{value:.6g}" if isinstance(value, float) else str(value) for value in row])
    return table


@click.group()
@click.version_option(__version__, prog_name="wvlab")
def cli():
    """Weak-value versus standard beam-deflection simulator."""
    try:
        setup_logging("wvlab")
    except ConfigError as e:
        console.print(f"[red]Configuration error: {e}[/red]")
        sys.exit(EXIT_CONFIG)


@cli.command()
@scenario_options
@click.option("--phi", "phis", multiple=True, help="Post-selection phase; repeat for a sweep (rad or suffixed)")
@click.option("--analytic-only", is_flag=True, help="Skip the simulated SNR pipeline")
@handle_errors
def fisher(scenario_name, seed, out_dir, threads, strict, phis, analytic_only):
    """Dark/bright shares of the Fisher information against phi."""
    ctx = _prepare("fisher", scenario_name, seed, out_dir, threads, strict)
    scenario = ctx.scenario
    try:
        phi_values = [parse_angle(p) for p in phis]
    except ValueError as e:
        raise ConfigError("invalid --phi", [str(e)]) from e
    phi_values = phi_values or list(scenario.sweep.phis) or [scenario.wv.phi]

    rows = []
    for phi in phi_values:
        rotated = scenario.with_phi(phi)
        _check_regime(ctx, rotated)
        report = fisher_analytic(rotated.beam, rotated.wv, rotated.drive.amplitude)
        rows.append({"phi": phi, "fraction_dark_analytic": report.dark_fraction, "fraction_bright_analytic": 1.0 - report.dark_fraction})

    if not analytic_only:
        for row, point in zip(rows, fisher_fraction_sweep(scenario, phi_values, ctx.threads)):
            row.update(
                snr_dark=point.snr_dark,
                snr_bright=point.snr_bright,
                fraction_dark=point.fraction_dark,
                fraction_bright=point.fraction_bright,
            )

    dark_key = "fraction_dark_analytic" if analytic_only else "fraction_dark"
    bright_key = "fraction_bright_analytic" if analytic_only else "fraction_bright"
    summary = {"points": len(rows), "fraction_dark_first": rows[0][dark_key], "mode": "analytic" if analytic_only else "simulated"}
    if len(rows) >= 2:
        fit = fisher_fraction_fit([r["phi"] for r in rows], [r[dark_key] for r in rows], [r[bright_key] for r in rows])
        summary["fit"] = fit.model_dump()
    summary["phi_max_one_percent"] = efficiency_angle_bound(0.01)

    path = write_csv(rows, ctx.out_dir / "fisher.csv")
    console.print(_table("Fisher information shares", ["phi", "dark", "bright"], [[r["phi"], r[dark_key], r[bright_key]] for r in rows]))
    _finish(ctx, {"fisher": path}, summary)


@cli.command()
@scenario_options
@click.option("--save-traces", is_flag=True, help="Also write the raw voltage traces")
@handle_errors
def spectrum(scenario_name, seed, out_dir, threads, strict, save_traces):
    """Averaged dBV spectra of both techniques and their peak ratios."""
    ctx = _prepare("spectrum", scenario_name, seed, out_dir, threads, strict)
    scenario = ctx.scenario
    _check_regime(ctx)

    outputs = {}
    summary = {}
    if scenario.disturbances.laser_jitter is not None:
        jitter = jitter_comparison(scenario, threads=ctx.threads)
        spectra = {"wv_dark": jitter.spectrum_wv, "st": jitter.spectrum_st}
        summary["laser_jitter"] = {
            **jitter.model_dump(include={"floor_dbv", "tones", "jitter_deviation", "delta_k", "delta_k_bound", "relative_error", "suppression", "predicted_single_tone"}),
            "reference_relative_errors": REFERENCE_RELATIVE_ERRORS,
            "reference_suppressions": REFERENCE_SUPPRESSIONS,
        }
    else:
        traces = run_timeseries(scenario, channels=("wv_dark", "st"), threads=ctx.threads)
        spectra = {channel: trace_spectrum(trace, scenario.run.n_averages) for channel, trace in traces.items()}
        if save_traces:
            for channel, trace in traces.items():
                outputs[f"trace_{channel}"] = write_trace(trace, ctx.out_dir / f"trace_{channel}.csv")

    freqs = {}
    if scenario.drive.amplitude != 0.0:
        freqs["signal"] = scenario.drive.frequency
    if scenario.disturbances.d_mod is not None and scenario.disturbances.d_mod.amplitude > 0:
        freqs["d_mod"] = scenario.disturbances.d_mod.frequency
    if scenario.disturbances.q_mod is not None and scenario.disturbances.q_mod.amplitude > 0:
        freqs["q_mod"] = scenario.disturbances.q_mod.frequency
    peaks = peak_ratio_table(spectra["wv_dark"], spectra["st"], freqs) if freqs else []

    wv_spec, st_spec = spectra["wv_dark"], spectra["st"]
    rows = [{"freq_hz": f, "dbv_wv": a, "dbv_st": b} for f, a, b in zip(wv_spec.freqs, wv_spec.dbv, st_spec.dbv)]
    outputs["spectrum"] = write_csv(rows, ctx.out_dir / "spectrum.csv")

    summary.update(
        peaks=[dict(p.model_dump(), resolved=p.resolved) for p in peaks],
        floor_dbv={channel: spec.floor_dbv(list(freqs.values())) for channel, spec in spectra.items()},
        parseval_ratio={channel: spec.parseval_ratio for channel, spec in spectra.items()},
        predicted_dbv=raw_signal_ratios(scenario.beam, scenario.wv, scenario.st).dbv(),
        reference_measured_factors=MEASURED_FACTORS,
    )
    console.print(_table(
        "Peak ratios (WVT - ST)",
        ["peak", "freq (Hz)", "dB", "linear", "resolved"],
        [[p.name, p.frequency, p.difference_db, p.linear, p.resolved] for p in peaks],
    ))
    _finish(ctx, outputs, summary)


def _slope_sweeps(ctx: RunContext) -> Dict[str, object]:
    scenario, sweep = ctx.scenario, ctx.scenario.sweep
    rows, fits = [], {}
    for kind, amplitudes in (("q", sweep.q_peak_to_peak), ("d", sweep.d_peak_to_peak)):
        if not amplitudes:
            continue
        predicted = ratio_of_ratios(scenario.beam, scenario.wv, scenario.st, kind)
        modes = ["ideal", "monte_carlo"] if sweep.monte_carlo else ["ideal"]
        for mode in modes:
            points = ratio_sweep(scenario, kind, mode, ctx.threads)
            fits[f"{kind}_{mode}"] = slope_fit_r(points, predicted).model_dump()
            rows.extend(point.model_dump() for point in points)
    return {"rows": rows, "fits": fits}


def _deviation_sweeps(ctx: RunContext) -> Dict[str, object]:
    scenario, sweep = ctx.scenario, ctx.scenario.sweep
    rows, advantages = [], {}
    for kind, amplitudes in (("d", sweep.d_rms), ("q", sweep.q_rms)):
        if not amplitudes:
            continue
        curves = {
            channel: deviation_curve(scenario, channel, kind, monte_carlo=sweep.monte_carlo, threads=ctx.threads)
            for channel in ("wv_dark", "st")
        }
        advantages[kind] = {"closed_form": advantage_factor(curves["wv_dark"], curves["st"])}
        if sweep.monte_carlo:
            advantages[kind]["monte_carlo"] = advantage_factor(curves["wv_dark"], curves["st"], monte_carlo=True)
        for points in curves.values():
            rows.extend(point.model_dump() for point in points)
    return {"rows": rows, "advantages": advantages}


@cli.command()
@scenario_options
@click.option("--axis", type=click.Choice(["modulation", "geometry"]), default="modulation", show_default=True)
@handle_errors
def sweep(scenario_name, seed, out_dir, threads, strict, axis):
    """Slope fits, deviation curves or the geometric-factor surface."""
    ctx = _prepare("sweep", scenario_name, seed, out_dir, threads, strict)
    scenario = ctx.scenario
    settings = scenario.sweep
    outputs, summary = {}, {"axis": axis}

    if axis == "geometry":
        phi = settings.geometry_phi or scenario.wv.phi
        surface = geometric_factor_surface(
            phi, settings.sigma_range, settings.fprime_range, settings.n_sigma, settings.n_fprime, scenario.beam.wavelength
        )
        rows = [
            {"sigma_m": s, "fprime_m": f, "factor": surface.values[i, j]}
            for i, s in enumerate(surface.sigma)
            for j, f in enumerate(surface.fprime)
        ]
        outputs["geometry"] = write_csv(rows, ctx.out_dir / "geometry.csv")
        summary.update(phi=phi, max_value=surface.max_value, argmax=list(surface.argmax), below_one=surface.max_value < 1.0)
        console.print(_table("Geometric factor", ["phi", "max", "sigma at max", "f' at max"], [[phi, surface.max_value, *surface.argmax]]))
    else:
        _check_regime(ctx)
        if not (settings.q_peak_to_peak or settings.d_peak_to_peak or settings.q_rms or settings.d_rms):
            raise ConfigError(f"scenario {scenario.name!r} defines no modulation amplitudes", ["sweep: add *_peak_to_peak or *_rms lists"])
        if settings.q_peak_to_peak or settings.d_peak_to_peak:
            slopes = _slope_sweeps(ctx)
            outputs["slopes"] = write_csv(slopes["rows"], ctx.out_dir / "slopes.csv")
            summary["slopes"] = slopes["fits"]
            summary["reference_slopes"] = {"predicted": PREDICTED_SLOPES, "measured": MEASURED_SLOPES}
            console.print(_table("Slope fits", ["fit", "slope", "r2", "predicted"], [[name, f["slope"], f["r2"], f["predicted"]] for name, f in slopes["fits"].items()]))
        if settings.q_rms or settings.d_rms:
            deviation = _deviation_sweeps(ctx)
            outputs["deviation"] = write_csv(deviation["rows"], ctx.out_dir / "deviation.csv")
            summary["advantages"] = deviation["advantages"]
            console.print(_table("WVT/ST advantage", ["modulation", "closed form"], [[kind, a["closed_form"]] for kind, a in deviation["advantages"].items()]))
    _finish(ctx, outputs, summary)


@cli.command()
@scenario_options
@click.option("--repetitions", type=click.IntRange(min=1), default=1, show_default=True, help="Plateau windows to estimate")
@handle_errors
def estimate(scenario_name, seed, out_dir, threads, strict, repetitions):
    """Split-detector estimates of k on plateau windows."""
    ctx = _prepare("estimate", scenario_name, seed, out_dir, threads, strict)
    _check_regime(ctx)
    reports = estimate_repetitions(ctx.scenario, repetitions, threads=ctx.threads)

    records = [
        {"channel": channel, "repetition": index, **report.model_dump()}
        for channel, items in reports.items()
        for index, report in enumerate(items)
    ]
    outputs = {
        "estimates": write_json(records, ctx.out_dir / "estimates.json"),
        "estimates_csv": write_csv(records, ctx.out_dir / "estimates.csv"),
    }
    summary = {"k_programmed": ctx.scenario.drive.amplitude, "channels": {c: summarize_reports(r) for c, r in reports.items()}}
    console.print(_table(
        "Estimates",
        ["channel", "k_hat", "delta_k", "bound", "efficiency"],
        [[c, s["k_hat_mean"], s["delta_k_mean"], s["delta_k_bound"], s["efficiency_mean"]] for c, s in summary["channels"].items()],
    ))
    _finish(ctx, outputs, summary)


@cli.command()
def presets():
    """List the shipped scenarios."""
    table = Table(title="Presets")
    table.add_column("name")
    table.add_column("description")
    for name in list_presets():
        table.add_row(name, load_scenario(name).description)
    console.print(table)


def main():
    cli()


if __name__ == "__main__":
    main()
