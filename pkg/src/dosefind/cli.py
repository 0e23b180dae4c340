"""Command-line interface: classify, gen-scenarios, simulate, table1,
counterexample, serve.

Machine-readable outputs (--format records) are byte-identical across
reruns with the same flags and seed, regardless of worker count.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import click
import numpy as np

from dosefind import records as rec_io
from dosefind.convergence import ccd_classify, crm_classify, crm_nominations
from dosefind.designs import DesignSpec
from dosefind.model import ToxScenario, mtd_index
from dosefind.scenarios import GenConfig, default_skeleton, gen_records
from dosefind.simulate import (
    counterexample_point,
    estimate_limit_set,
    run_trial,
    table1_crosstab,
    trial_rng,
)


def _parse_floats(text: str, name: str) -> Tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.replace(" ", "").split(",") if tok)
    except ValueError:
        raise click.ClickException(f"could not parse {name}={text!r} as comma-separated numbers")


def _scenario_from_flags(f: Optional[str], p: float, scenario_file: Optional[str], index: int) -> ToxScenario:
    if f is not None:
        values = _parse_floats(f, "--f")
        try:
            return ToxScenario(f=values, p=p)
        except ValueError as exc:
            raise click.ClickException(f"invalid --f: {exc}")
    if scenario_file is not None:
        scenarios = rec_io.read_scenarios(scenario_file)
        if not 0 <= index < len(scenarios):
            raise click.ClickException(f"--index {index} outside 0..{len(scenarios) - 1}")
        return scenarios[index]
    raise click.ClickException("provide --f or --scenario-file")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text + ("\n" if not text.endswith("\n") else ""))
    else:
        click.echo(text)


@click.group()
def main():
    """Dose-finding design toolkit: allocation rules, convergence
    classification, scenario generation, and Monte Carlo studies."""


@main.command()
@click.option("--f", "f_text", default=None, help="true toxicity rates, comma-separated")
@click.option("--scenario-file", default=None, type=click.Path(exists=True))
@click.option("--index", default=0, show_default=True, help="scenario index within --scenario-file")
@click.option("--p", required=True, type=float, help="target toxicity rate")
@click.option("--dp1", required=True, type=float, help="interval half-width below target")
@click.option("--dp2", required=True, type=float, help="interval half-width above target")
@click.option("--skeleton", default=None, help="CRM prior rates, comma-separated (default by m)")
@click.option("--out", default=None, type=click.Path())
@click.option("--format", "fmt", default="text", type=click.Choice(["text", "records"]))
def classify(f_text, scenario_file, index, p, dp1, dp2, skeleton, out, fmt):
    """Deterministic convergence verdicts for one scenario."""
    scenario = _scenario_from_flags(f_text, p, scenario_file, index)
    try:
        ccd = ccd_classify(scenario, dp1, dp2)
    except ValueError as exc:
        raise click.ClickException(f"invalid interval --dp1/--dp2: {exc}")
    if skeleton is not None:
        skel = _parse_floats(skeleton, "--skeleton")
    else:
        try:
            skel = default_skeleton(scenario.m)
        except ValueError as exc:
            raise click.ClickException(f"--skeleton required: {exc}")
    if len(skel) != scenario.m:
        raise click.ClickException(f"--skeleton length {len(skel)} != m={scenario.m}")
    u_star = mtd_index(scenario)
    table = crm_nominations(scenario, skel)
    crm = crm_classify(table, u_star)
    if fmt == "records":
        _emit(
            rec_io.dumps(
                {
                    "f": list(scenario.f),
                    "p": p,
                    "dp1": dp1,
                    "dp2": dp2,
                    "mtd": u_star,
                    "ccd_class": ccd.klass,
                    "levels_in_interval": sorted(ccd.levels_in_interval),
                    "oscillation_pair": list(ccd.oscillation_pair) if ccd.oscillation_pair else None,
                    "boundary_case": ccd.boundary_case,
                    "skeleton": list(skel),
                    "crm_class": crm.klass,
                    "theta": list(table.theta),
                    "nominee": list(table.nominee),
                }
            ),
            out,
        )
        return
    lines = [
        f"MTD: level {u_star} (|f - p| minimized)",
        f"CCD: {ccd.klass}",
        f"  levels in closed interval: {sorted(ccd.levels_in_interval) or '[]'}",
        f"  boundary case: {'yes' if ccd.boundary_case else 'no'}",
    ]
    if ccd.oscillation_pair:
        lines.append(f"  oscillation pair: {ccd.oscillation_pair}")
    if ccd.note:
        lines.append(f"  note: {ccd.note}")
    lines.append(f"CRM: {crm.klass}")
    lines.append(f"  skeleton: {', '.join(f'{s:g}' for s in skel)}")
    lines.append("  level    f       theta   nominee")
    for u in range(1, scenario.m + 1):
        lines.append(
            f"  {u:>5}  {scenario.f[u - 1]:.4f}  {table.theta[u - 1]:>7.3f}  {table.nominee[u - 1]:>7}"
        )
    _emit("\n".join(lines), out)


@main.command("gen-scenarios")
@click.option("--m", required=True, type=int)
@click.option("--count", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--p", default=0.3, show_default=True, type=float)
@click.option("--inc-lo", default=0.01, show_default=True, type=float)
@click.option("--inc-hi", default=0.40, show_default=True, type=float)
@click.option("--edge-lo", default=0.005, show_default=True, type=float)
@click.option("--edge-hi", default=0.95, show_default=True, type=float)
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
def gen_scenarios(m, count, seed, p, inc_lo, inc_hi, edge_lo, edge_hi, workers, out):
    """Generate a scenario ensemble to a line-delimited records file."""
    try:
        config = GenConfig(
            m=m, count=count, seed=seed, p=p,
            inc_lo=inc_lo, inc_hi=inc_hi, edge_lo=edge_lo, edge_hi=edge_hi,
        )
        recs = gen_records(config, workers=workers)
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(str(exc))
    try:
        rec_io.write_scenarios(out, recs, config)
    except OSError as exc:
        raise click.ClickException(f"cannot write {out}: {exc}")
    click.echo(f"wrote {len(recs)} scenarios to {out}", err=True)


@main.command()
@click.option("--f", "f_text", default=None)
@click.option("--scenario-file", default=None, type=click.Path(exists=True))
@click.option("--index", default=0, show_default=True)
@click.option("--design", required=True, type=click.Choice(["interval", "point", "crm"]))
@click.option("--p", required=True, type=float)
@click.option("--dp1", default=None, type=float)
@click.option("--dp2", default=None, type=float)
@click.option("--skeleton", default=None)
@click.option("--cohort", default=1, show_default=True, type=int)
@click.option("--start", default=1, show_default=True, type=int)
@click.option("--n", required=True, type=int, help="subjects per trial")
@click.option("--reps", default=1, show_default=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--tail", default=0.1, show_default=True, type=float)
@click.option("--out", default=None, type=click.Path())
@click.option("--format", "fmt", default="text", type=click.Choice(["text", "records"]))
def simulate(f_text, scenario_file, index, design, p, dp1, dp2, skeleton, cohort, start, n,
             reps, seed, tail, out, fmt):
    """Run seeded Monte Carlo trials for one scenario and design."""
    scenario = _scenario_from_flags(f_text, p, scenario_file, index)
    skel = _parse_floats(skeleton, "--skeleton") if skeleton else None
    try:
        spec = DesignSpec(
            kind=design, p=p, m=scenario.m, cohort=cohort, start=start,
            dp1=dp1, dp2=dp2, skeleton=skel,
        )
    except ValueError as exc:
        raise click.ClickException(str(exc))
    lines = []
    settled_at = 0
    u_star = mtd_index(scenario)
    for r in range(reps):
        trace = run_trial(scenario, spec, n, seed=trial_rng(seed, 0, r))
        ls = estimate_limit_set(trace, tail_fraction=tail)
        if ls.settled and ls.s1 == u_star:
            settled_at += 1
        if fmt == "records":
            lines.append(
                rec_io.dumps(
                    {
                        "rep": r,
                        "seed_info": {"seed": seed, "spawn_key": [0, r]},
                        "recommended": trace.recommended,
                        "s1": ls.s1,
                        "s2": ls.s2,
                        "settled": ls.settled,
                        "n_per_level": list(trace.final_state.n),
                        "tox_per_level": list(trace.final_state.tox),
                    }
                )
            )
        else:
            lines.append(
                f"rep {r}: recommended={trace.recommended} tail-limit-set=({ls.s1},{ls.s2})"
                f"{' settled' if ls.settled else ''}"
            )
    if fmt == "text":
        lines.append(
            f"settled at MTD (level {u_star}) in {settled_at}/{reps} replications"
        )
    _emit("\n".join(lines), out)


@main.command()
@click.option("--m", required=True, type=int)
@click.option("--count", default=2500, show_default=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--p", default=0.3, show_default=True, type=float)
@click.option("--skeleton", default=None, help="CRM skeleton (default by m)")
@click.option("--widths", default="0.1,0.05", show_default=True,
              help="CCD interval half-widths, comma-separated")
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(), help="output path prefix")
def table1(m, count, seed, p, skeleton, widths, workers, out):
    """Cross-tabulate CRM vs CCD convergence classes on a generated ensemble."""
    skel = _parse_floats(skeleton, "--skeleton") if skeleton else default_skeleton(m)
    half = _parse_floats(widths, "--widths")
    configs = [(w, w) for w in half]
    try:
        config = GenConfig(m=m, count=count, seed=seed, p=p)
        recs = gen_records(config, workers=workers)
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(str(exc))
    ensemble = [r.scenario for r in recs]
    tab = table1_crosstab(ensemble, configs, skel)
    text = tab.render()
    if out:
        try:
            Path(f"{out}.txt").write_text(text + "\n")
            lines = []
            for rec in recs:
                u_star = mtd_index(rec.scenario)
                crm = crm_classify(crm_nominations(rec.scenario, skel), u_star)
                row = {
                    "id": rec.id,
                    "f": list(rec.scenario.f),
                    "mtd": u_star,
                    "crm_class": crm.klass,
                    "seed_info": {"seed": seed, "spawn_key": [rec.id]},
                }
                for w, _ in configs:
                    row[f"ccd_class_{w:g}"] = ccd_classify(rec.scenario, w, w).klass
                lines.append(rec_io.dumps(row))
            rec_io.write_lines(f"{out}.jsonl", lines)
        except OSError as exc:
            raise click.ClickException(f"cannot write outputs at prefix {out}: {exc}")
        click.echo(f"wrote {out}.txt and {out}.jsonl", err=True)
    click.echo(text)


@main.command()
@click.option("--f", "f_text", required=True, help="true toxicity rates, comma-separated")
@click.option("--p", required=True, type=float)
@click.option("--cohort", default=1, show_default=True, type=int)
@click.option("--start", default=1, show_default=True, type=int)
@click.option("--n", default=500, show_default=True, type=int)
@click.option("--reps", default=100_000, show_default=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--out", default=None, type=click.Path())
@click.option("--format", "fmt", default="text", type=click.Choice(["text", "records"]))
def counterexample(f_text, p, cohort, start, n, reps, seed, out, fmt):
    """Point-design non-convergence trap frequency vs its analytic bound."""
    scenario = _scenario_from_flags(f_text, p, None, 0)
    try:
        spec = DesignSpec(kind="point", p=p, m=scenario.m, cohort=cohort, start=start)
        res = counterexample_point(scenario, spec, n=n, replications=reps, seed=seed)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    if fmt == "records":
        _emit(
            rec_io.dumps(
                {
                    "f": list(scenario.f),
                    "p": p,
                    "n": n,
                    "replications": reps,
                    "seed": seed,
                    "trap_frequency": res.trap_frequency,
                    "lower_bound": res.lower_bound,
                    "mc_standard_error": res.mc_standard_error,
                }
            ),
            out,
        )
        return
    _emit(
        f"trap frequency: {res.trap_frequency:.5f} over {reps} replications\n"
        f"analytic canonical-path lower bound: {res.lower_bound:.5f}\n"
        f"Monte Carlo standard error: {res.mc_standard_error:.5f}",
        out,
    )


@main.command()
@click.option("--host", default=None, envvar="DOSEFIND_HOST", help="listen address (env DOSEFIND_HOST)")
@click.option("--port", default=None, type=int, envvar="DOSEFIND_PORT", help="listen port (env DOSEFIND_PORT)")
@click.option("--data-dir", default="./sessions", show_default=True, type=click.Path())
@click.option("--static-dir", default=None, type=click.Path(exists=True),
              help="serve a built UI bundle from this directory")
def serve(host, port, data_dir, static_dir):
    """Run the trial-session HTTP service."""
    import uvicorn

    from dosefind.service import create_app

    app = create_app(data_dir, static_dir=static_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=port or 8711)


if __name__ == "__main__":
    main()
