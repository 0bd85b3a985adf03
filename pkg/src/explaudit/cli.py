"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or capacity error, 3 network or
remote-protocol error.
"""

import os
import random
import sys
from types import SimpleNamespace

import click
import requests
import yaml

from .audit import find_ip_exhaustive, scenario_a_probe, scenario_b_swap
from .credit import (DEFAULT_COLUMN_MAP, build_feature_space, load_german_numeric,
                     profiles_from_rows, synthesize_credit_like)
from .dimpact import emit_curves
from .errors import ExplauditError, ProtocolError, RateLimitedError
from .experiment import load_experiment_config, run_experiment
from .explain import passes_user_checks
from .mlp import TrainSpec, load_mlp, save_mlp, train_mlp
from .reports import (confidence_rows, probe_summary_rows, render_accuracy_figure,
                      render_confidence_figure, render_dimpact_figure,
                      render_rates_figure, replication_report, write_confidence_csv,
                      write_dimpact_csv, write_metrics_csv, write_probe_csv)
from .service import (MODES, ClassifyService, MlpBackend, RemoteOracle, TreeBackend,
                      load_service_config, make_server)
from .space import FeatureSpace
from .tree import (TrainConfig, load_tree, load_training_csv, path_explanation,
                   pr_attack_prune, save_tree)
from .tree import train as train_tree


@click.group()
def cli():
    """Train models, serve decisions with explanations, and audit a served
    model for explanation incoherence."""


def _ensure_out(out):
    os.makedirs(out, exist_ok=True)
    return out


@cli.command()
@click.option("--backend", type=click.Choice(["mlp", "tree"]), default="mlp",
              show_default=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False), default=None,
              help="mlp: whitespace-separated numeric credit file (omitted means "
                   "fabricated data); tree: CSV with feature columns plus 'label'.")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Feature space YAML (tree backend).")
@click.option("--max-depth", type=int, default=8, show_default=True,
              help="Tree growth cap (tree backend).")
@click.option("--synthetic-rows", type=int, default=1000, show_default=True)
@click.option("--synthetic-seed", type=int, default=7, show_default=True)
@click.option("--column-map", "column_map_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="YAML mapping protected feature names to 0-based columns.")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--hidden", type=int, default=23, show_default=True)
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--lr", type=float, default=0.1, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--val-fraction", type=float, default=0.25, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--seeds", "n_seeds", type=int, default=1, show_default=True,
              help="mlp: train this many models on consecutive seeds from --seed.")
def train(backend, data, space_path, max_depth, synthetic_rows, synthetic_seed,
          column_map_path, out, hidden, epochs, lr, batch_size, val_fraction,
          seed, n_seeds):
    """Train a model into --out: tree.yaml for the tree backend; model.yaml,
    space.yaml, metrics.csv and the accuracy figure for the mlp backend."""
    out = _ensure_out(out)
    if backend == "tree":
        if data is None or space_path is None:
            raise click.UsageError("tree backend needs --data and --space")
        space = FeatureSpace.load(space_path)
        rows, labels = load_training_csv(data, space)
        tree = train_tree(space, rows, labels, TrainConfig(max_depth=max_depth))
        save_tree(tree, os.path.join(out, "tree.yaml"))
        hits = sum(tree.predict(x) == y for x, y in zip(rows, labels))
        click.echo(f"training accuracy {hits / len(rows):.4f} over {len(rows)} rows, "
                   f"{tree.node_count()} nodes")
        click.echo(f"wrote tree.yaml to {out}")
        return

    if n_seeds < 1:
        raise click.UsageError("--seeds must be >= 1")
    column_map = _load_column_map(column_map_path)
    if data is not None:
        X, y = load_german_numeric(data)
    else:
        X, y = synthesize_credit_like(synthetic_rows, synthetic_seed, column_map)
    space = build_feature_space(X, column_map)

    runs = []
    base_model = None
    for s in range(seed, seed + n_seeds):
        spec = TrainSpec(hidden=hidden, epochs=epochs, lr=lr, batch_size=batch_size,
                         val_fraction=val_fraction, seed=s)
        result = train_mlp(X, y, spec)
        if base_model is None:
            base_model = result.model
        runs.append(SimpleNamespace(seed=s, history=result.history))
        click.echo(f"seed {s}: validation accuracy {result.final_val_accuracy:.4f}",
                   err=True)

    save_mlp(base_model, os.path.join(out, "model.yaml"))
    space.save(os.path.join(out, "space.yaml"))
    write_metrics_csv(runs, os.path.join(out, "metrics.csv"))
    render_accuracy_figure(runs, os.path.join(out, "accuracy.png"))
    mean_acc = sum(r.history[-1].val_accuracy for r in runs) / len(runs)
    click.echo(f"mean validation accuracy {mean_acc:.4f} over {n_seeds} seed(s)")
    click.echo(f"wrote model.yaml, space.yaml, metrics.csv, accuracy.png to {out}")


def _load_column_map(path):
    if path is None:
        return dict(DEFAULT_COLUMN_MAP)
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return {str(k): int(v) for k, v in doc.items()}


def _parse_assignment(text):
    if "=" not in text:
        raise click.UsageError(f"expected NAME=VALUE, got {text!r}")
    name, raw = text.split("=", 1)
    for cast in (int, float):
        try:
            return name, cast(raw)
        except ValueError:
            continue
    return name, raw


@cli.command("attack-demo")
@click.option("--tree", "tree_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--set", "assignments", multiple=True, metavar="NAME=VALUE",
              help="Feature values of the query; repeat for every feature.")
@click.option("--literal-splice", is_flag=True,
              help="Also collapse untaken branches on legitimate nodes to a dummy leaf.")
def attack_demo(tree_path, assignments, literal_splice):
    """Show what an honest service and an attacking service would say for one
    query against a decision tree."""
    tree = load_tree(tree_path)
    mapping = dict(_parse_assignment(a) for a in assignments)
    x = tree.space.instance_from_mapping(mapping)

    decision = tree.predict(x)
    honest = path_explanation(tree, x)
    surrogate = pr_attack_prune(tree, x, collapse_untaken_legit=literal_splice)
    attack = path_explanation(surrogate, x)

    click.echo(f"decision: {decision}")
    click.echo(f"honest explanation:   {honest.describe()}")
    click.echo(f"  user checks pass: {passes_user_checks(honest, x, decision, tree.space)}")
    click.echo(f"attack explanation:   {attack.describe()}")
    click.echo(f"  user checks pass: {passes_user_checks(attack, x, decision, tree.space)}")
    click.echo("surrogate tree:")
    click.echo(surrogate.render(indent="  "))


def _sample_profiles(space, n, rng):
    return [tuple(f.domain.sample(rng) for f in space.features) for _ in range(n)]


def _default_swap_sets(space):
    names = [space.features[i].name for i in space.discriminative_indices]
    sets = [(name,) for name in names]
    if len(names) > 1:
        sets.append(tuple(names))
    return sets


def _parse_swap_sets(texts, space):
    sets = []
    for text in texts:
        names = tuple(n.strip() for n in text.split(",") if n.strip())
        if not names:
            raise click.UsageError(f"empty --swap-set {text!r}")
        for name in names:
            if not space.has_feature(name):
                raise click.UsageError(f"--swap-set names unknown feature {name!r}")
        sets.append(names)
    return sets


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Experiment config; trains models locally and probes them.")
@click.option("--url", default=None, help="Audit a served model over HTTP.")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Audit a serialized model in process.")
@click.option("--backend", type=click.Choice(["tree", "mlp"]), default="tree",
              show_default=True, help="How to read --model.")
@click.option("--mode", type=click.Choice(list(MODES)), default="honest",
              show_default=True, help="Service mode for the in-process target.")
@click.option("--scenario", type=click.Choice(["a", "b", "exhaustive", "all"]),
              default="all", show_default=True)
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Feature space YAML (remote target or mlp model).")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Numeric credit file supplying probe profiles; omitted means "
                   "profiles sampled uniformly from the space.")
@click.option("--swap-set", "swap_set_texts", multiple=True, metavar="NAME[,NAME...]",
              help="Scenario b feature set; repeat for several. Default: each "
                   "discriminative feature alone, then all together.")
@click.option("--client-id", default="auditor", show_default=True)
@click.option("--profiles", "n_profiles", type=int, default=50, show_default=True)
@click.option("--trials", type=int, default=500, show_default=True)
@click.option("--confidence", "conf_target", type=float, default=0.99, show_default=True,
              help="Detection-confidence target for confidence.csv.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def audit(config_path, url, model_path, backend, mode, scenario, space_path, data,
          swap_set_texts, client_id, n_profiles, trials, conf_target, seed, out):
    """Probe a decision oracle for incoherent pairs and write probe.csv,
    confidence.csv and the matching figures into --out."""
    targets = [t for t in (config_path, url, model_path) if t is not None]
    if len(targets) != 1:
        raise click.UsageError("pass exactly one of --config, --url or --model")
    out = _ensure_out(out)

    if config_path is not None:
        if scenario == "exhaustive":
            raise click.UsageError("--scenario exhaustive needs --url or --model")
        result = run_experiment(
            load_experiment_config(config_path),
            progress=lambda run: click.echo(
                f"model seed {run.seed}: val accuracy {run.val_accuracy:.4f}", err=True))
        summaries = result.probe_summaries()
        write_metrics_csv(result.runs, os.path.join(out, "metrics.csv"))
        render_accuracy_figure(result.runs, os.path.join(out, "accuracy.png"))
        report = replication_report(result, target=conf_target)
        with open(os.path.join(out, "report.txt"), "w") as fh:
            fh.write(report)
        click.echo(report, nl=False)
    else:
        oracle, space = _audit_target(url, model_path, backend, mode,
                                      space_path, client_id)
        if scenario == "exhaustive":
            space.require_enumerable()
            pair = find_ip_exhaustive(oracle, space)
            lines = [_describe_pair(pair, space)]
            with open(os.path.join(out, "exhaustive.txt"), "w") as fh:
                fh.write("\n".join(lines) + "\n")
            click.echo(lines[0])
            click.echo(f"wrote exhaustive.txt to {out}")
            return

        profiles = _audit_profiles(space, data, n_profiles, seed)
        probes = []
        if scenario in ("a", "all"):
            probes.append(scenario_a_probe(oracle, space, profiles, trials,
                                           rng_seed=seed + 1))
        if scenario in ("b", "all"):
            swap_sets = (_parse_swap_sets(swap_set_texts, space)
                         or _default_swap_sets(space))
            for names in swap_sets:
                probes.append(scenario_b_swap(oracle, space, profiles, names))
        summaries = probe_summary_rows(probes)
        for s in summaries:
            click.echo(f"{s.features}: {s.ips_found}/{s.pairs_tested} incoherent "
                       f"(rate {s.rate:.4f})")

    write_probe_csv(summaries, os.path.join(out, "probe.csv"))
    rows_ = confidence_rows(summaries, target=conf_target)
    write_confidence_csv(rows_, os.path.join(out, "confidence.csv"))
    render_rates_figure(summaries, os.path.join(out, "rates.png"))
    render_confidence_figure(rows_, os.path.join(out, "confidence.png"), target=conf_target)
    click.echo(f"wrote probe.csv, confidence.csv and figures to {out}")


def _audit_target(url, model_path, backend, mode, space_path, client_id):
    """(oracle, space) for a remote URL or an in-process serialized model."""
    if url is not None:
        if space_path is None:
            raise click.UsageError("--url needs --space")
        space = FeatureSpace.load(space_path)
        return RemoteOracle(url, client_id, space), space
    if backend == "tree":
        service = ClassifyService(TreeBackend(load_tree(model_path)), mode=mode)
    else:
        if space_path is None:
            raise click.UsageError("--backend mlp needs --space")
        service = ClassifyService(
            MlpBackend(load_mlp(model_path), FeatureSpace.load(space_path)), mode=mode)
    return (lambda x: service.classify(x)[0]), service.space


def _audit_profiles(space, data, n_profiles, seed):
    if n_profiles < 2:
        raise click.UsageError("--profiles must be >= 2")
    if data is not None:
        X, _ = load_german_numeric(data)
        rows = profiles_from_rows(X)
        picker = random.Random(seed)
        return picker.sample(rows, min(n_profiles, len(rows)))
    return _sample_profiles(space, n_profiles, random.Random(seed))


def _describe_pair(pair, space):
    if pair is None:
        return "no incoherent pair exists: decisions ignore discriminative features"
    names = [f.name for f in space.features]
    first = ", ".join(f"{n}={v}" for n, v in zip(names, pair.first.x))
    second = ", ".join(f"{n}={v}" for n, v in zip(names, pair.second.x))
    return (f"incoherent pair found: ({first}) -> {pair.first.decision} "
            f"vs ({second}) -> {pair.second.decision}")


@cli.command()
@click.option("--alpha-steps", type=int, default=50, show_default=True,
              help="Grid density over alpha in (0, 1].")
@click.option("--p-b", "p_bs", default="0.1,0.3,0.5,0.7", show_default=True,
              help="Comma-separated base approval rates.")
@click.option("--out", type=click.Path(file_okay=False), required=True)
def dimpact(alpha_steps, p_bs, out):
    """Tabulate how disparate impact translates into incoherent-pair
    probability; writes dimpact.csv and dimpact.png into --out."""
    if alpha_steps < 1:
        raise click.UsageError("--alpha-steps must be >= 1")
    alphas = [i / alpha_steps for i in range(1, alpha_steps + 1)]
    try:
        rates = [float(v) for v in p_bs.split(",") if v.strip()]
    except ValueError:
        raise click.UsageError(f"bad --p-b list {p_bs!r}")
    points = emit_curves(alphas, rates)
    out = _ensure_out(out)
    write_dimpact_csv(points, os.path.join(out, "dimpact.csv"))
    render_dimpact_figure(points, os.path.join(out, "dimpact.png"))
    click.echo(f"wrote dimpact.csv and dimpact.png to {out} ({len(points)} rows)")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--mode", type=click.Choice(list(MODES)), default=None,
              help="Override the config file's mode.")
def serve(config_path, mode):
    """Run the classify-and-explain HTTP service until interrupted."""
    service, limiter, host, port = load_service_config(config_path, mode_override=mode)
    server = make_server(service, limiter, host, port)
    host_, port_ = server.server_address[:2]
    click.echo(f"serving on http://{host_}:{port_} (POST /v1/classify, GET /v1/health)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


_DATA_ERRORS = 2
_NETWORK_ERRORS = 3


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (ProtocolError, RateLimitedError) as exc:
        click.echo(f"error: {exc}", err=True)
        return _NETWORK_ERRORS
    except requests.RequestException as exc:
        click.echo(f"error: {exc}", err=True)
        return _NETWORK_ERRORS
    except ExplauditError as exc:
        click.echo(f"error: {exc}", err=True)
        return _DATA_ERRORS


if __name__ == "__main__":
    sys.exit(main())
