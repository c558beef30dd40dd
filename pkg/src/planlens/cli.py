"""Command-line interface: serve, ask, scenario, drift, eval, validate."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import dsl
from .config import ServiceConfig, load_config, make_backend
from .drift import DriftConfig, compute_drift, render_report
from .evaluation import FaultInjectingBackend, load_eval_bank, run_eval, summary_table
from .insights import load_history
from .model import load_dataset, validate
from .pipeline import OfflineTranslator, answer, answer_to_dict, load_example_bank, open_session
from .solver import diff_plans, diff_to_dict, solve

DEFAULT_BANK = Path(__file__).resolve().parents[2] / "fixtures" / "banks" / "examples.jsonl"


def _resolve_dataset(dataset: str | None, network: str | None, demand: str | None):
    if dataset:
        root = Path(dataset)
        return root / "network.json", root / "demand.csv", root / "history.jsonl"
    if network and demand:
        return Path(network), Path(demand), None
    raise click.UsageError("provide --dataset DIR or both --network and --demand")


def _load_config(config_path: str | None, offline: bool) -> ServiceConfig:
    cfg = load_config(config_path)
    if offline:
        cfg.backend = "offline"
    return cfg


def _open_cli_session(cfg: ServiceConfig, dataset, network, demand, bank_path):
    network_path, demand_path, history_path = _resolve_dataset(dataset, network, demand)
    net, dem = load_dataset(network_path, demand_path)
    bank_file = Path(bank_path) if bank_path else DEFAULT_BANK
    bank = load_example_bank(bank_file) if bank_file.exists() else ()
    history = (load_history(history_path)
               if history_path is not None and history_path.exists() else None)
    backend = make_backend(cfg)
    return open_session(net, dem, backend, bank, k=cfg.example_count, history=history,
                        paraphrase_enabled=cfg.paraphrase)


dataset_options = [
    click.option("--dataset", type=click.Path(exists=True, file_okay=False),
                 help="Directory holding network.json and demand.csv"),
    click.option("--network", type=click.Path(exists=True, dir_okay=False)),
    click.option("--demand", type=click.Path(exists=True, dir_okay=False)),
]


def with_dataset_options(fn):
    for option in reversed(dataset_options):
        fn = option(fn)
    return fn


@click.group()
def main() -> None:
    """What-if engine for supply-chain plans."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--offline", is_flag=True, help="Force the offline translator backend")
@click.option("--dataset", type=click.Path(exists=True, file_okay=False),
              help="Preload this dataset directory into the store at startup")
@click.option("--listen", default=None, help="host:port (overrides config)")
def serve(config_path, offline, dataset, listen):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    cfg = _load_config(config_path, offline)
    if listen:
        cfg.listen = listen
    app = create_app(cfg)
    if dataset:
        root = Path(dataset)
        history_file = root / "history.jsonl"
        dataset_id = app.state.store.put(
            (root / "network.json").read_bytes(),
            (root / "demand.csv").read_bytes(),
            history_file.read_bytes() if history_file.exists() else None)
        click.echo(f"preloaded dataset {dataset_id}")
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")


@main.command()
@click.argument("question")
@with_dataset_options
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--offline", is_flag=True)
@click.option("--bank", "bank_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Print the full answer payload")
def ask(question, dataset, network, demand, config_path, offline, bank_path, as_json):
    """Answer one planner question against a dataset."""
    cfg = _load_config(config_path, offline)
    session = _open_cli_session(cfg, dataset, network, demand, bank_path)
    result = answer(session, question)
    if as_json:
        click.echo(json.dumps(answer_to_dict(result), indent=2))
    else:
        click.echo(f"[{result.kind}] {result.text}")
        if result.dsl:
            click.echo(f"script: {result.dsl}")


@main.command()
@click.argument("script_text")
@with_dataset_options
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def scenario(script_text, dataset, network, demand, config_path, as_json):
    """Apply a scenario script directly and print the plan diff."""
    network_path, demand_path, _ = _resolve_dataset(dataset, network, demand)
    net, dem = load_dataset(network_path, demand_path)
    try:
        script = dsl.parse(script_text)
        alt_net, alt_dem, _ = dsl.apply(script, net, dem)
    except dsl.ScenarioError as exc:
        raise click.ClickException(str(exc)) from None
    base = solve(net, dem)
    alt = solve(alt_net, alt_dem)
    diff = diff_plans(base, alt)
    if as_json:
        click.echo(json.dumps(diff_to_dict(diff), indent=2))
    else:
        click.echo(f"baseline {diff.base_total:.2f} -> scenario {diff.alt_total:.2f} "
                   f"(delta {diff.delta_total:+.2f})")
        for lane, before, after in diff.changed_flows:
            click.echo(f"  {lane}: {before:g} -> {after:g}")
        if diff.delta_lost:
            for record, delta in sorted(diff.delta_lost.items()):
                click.echo(f"  lost {record}: {delta:+g}")
        click.echo(diff.feasibility_note)


@main.command()
@click.argument("snapshot_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("snapshot_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", default="markdown",
              type=click.Choice(["markdown", "email-text"]))
@click.option("--out", type=click.Path(dir_okay=False), help="Write the report to a file")
@click.option("--large-swing", default=0.5, show_default=True,
              help="Flag quantity changes above this fraction of the prior value")
def drift(snapshot_a, snapshot_b, fmt, out, large_swing):
    """Compare two demand snapshots and render the drift report."""
    from .model import load_demand

    plan_a = load_demand(snapshot_a)
    plan_b = load_demand(snapshot_b)
    report = compute_drift(plan_a, plan_b, DriftConfig(large_swing_fraction=large_swing))
    text = render_report(report, fmt)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@main.command(name="eval")
@click.argument("bank", type=click.Path(exists=True, dir_okay=False))
@with_dataset_options
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--offline", is_flag=True)
@click.option("--example-bank", "bank_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--fault-every", default=0, help="Corrupt every nth translation (0 = off)")
@click.option("--json", "as_json", is_flag=True)
def eval_command(bank, dataset, network, demand, config_path, offline, bank_path,
                 fault_every, as_json):
    """Score a question bank against a dataset."""
    from .evaluation import report_to_dict

    cfg = _load_config(config_path, offline)
    items = load_eval_bank(bank)
    base_session = _open_cli_session(cfg, dataset, network, demand, bank_path)
    shared_backend = (FaultInjectingBackend(OfflineTranslator(), every=fault_every)
                      if fault_every else None)

    def template():
        backend = shared_backend if shared_backend is not None else make_backend(cfg)
        return open_session(base_session.network, base_session.demand, backend,
                            base_session.bank, k=cfg.example_count,
                            history=base_session.history)

    report = run_eval(items, template)
    if as_json:
        click.echo(json.dumps(report_to_dict(report), indent=2))
    else:
        click.echo(summary_table(report))


@main.command(name="validate")
@with_dataset_options
def validate_command(dataset, network, demand):
    """Load a dataset and report every validation issue."""
    network_path, demand_path, _ = _resolve_dataset(dataset, network, demand)
    net, dem = load_dataset(network_path, demand_path)
    issues = validate(net, dem)
    if not issues:
        click.echo("ok: no issues")
        return
    for issue in issues:
        click.echo(f"{issue.severity}: [{issue.code}] {issue.message} ({issue.location})")
    if any(i.severity == "error" for i in issues):
        sys.exit(1)


if __name__ == "__main__":
    main()
