"""Report outputs: delimited files for downstream tooling and matplotlib
figures rendered next to them.

All writers format numbers the same way regardless of where the probed
decisions came from, so transcripts gathered in process and over HTTP yield
byte-identical files when the decisions agree.
"""

import csv

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .audit import confidence, queries_needed
from .dimpact import INDEPENDENCE

RATE_FMT = "{:.6f}"


def _open_csv(path):
    return open(path, "w", newline="")


def probe_summary_rows(reports):
    """Adapt single-run audit reports to the probe CSV row shape (stddev 0:
    one run has no spread)."""
    from .experiment import ProbeSummary
    return [ProbeSummary(features=r.features, pairs_tested=r.pairs_tested,
                         ips_found=r.ips_found, rate=r.ip_rate, stddev=0.0)
            for r in reports]


def write_probe_csv(summaries, path):
    """features,pairs_tested,ips_found,rate,stddev"""
    with _open_csv(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["features", "pairs_tested", "ips_found", "rate", "stddev"])
        for s in summaries:
            w.writerow([s.features, s.pairs_tested, s.ips_found,
                        RATE_FMT.format(s.rate), RATE_FMT.format(s.stddev)])


def write_metrics_csv(runs, path):
    """seed,epoch,val_accuracy: final epoch of each model, one row per seed."""
    with _open_csv(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "epoch", "val_accuracy"])
        for run in runs:
            stat = run.history[-1]
            w.writerow([run.seed, stat.epoch, RATE_FMT.format(stat.val_accuracy)])


def confidence_rows(summaries, target: float = 0.99):
    """Long-form detection-confidence curves, one (features, rate, n,
    confidence) row per probe count from 1 up to the first n reaching the
    target. Zero-rate summaries produce no rows: no probes can expose them."""
    rows = []
    for s in summaries:
        if s.rate <= 0.0:
            continue
        needed = queries_needed(s.rate, target)
        for n in range(1, needed + 1):
            rows.append((s.features, s.rate, n, confidence(s.rate, n)))
    return rows


def write_confidence_csv(rows, path):
    """features,rate,n,confidence"""
    with _open_csv(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["features", "rate", "n", "confidence"])
        for features, rate, n, conf in rows:
            w.writerow([features, RATE_FMT.format(rate), n, RATE_FMT.format(conf)])


def write_dimpact_csv(points, path):
    """scenario,alpha,p_b,p_ip"""
    with _open_csv(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "alpha", "p_b", "p_ip"])
        for p in points:
            w.writerow([p.scenario, RATE_FMT.format(p.alpha),
                        RATE_FMT.format(p.p_b), RATE_FMT.format(p.p_ip)])


# -- figures ------------------------------------------------------------------

def render_rates_figure(summaries, path):
    """Bar chart of incoherence rates per probed feature set, one sd whisker."""
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = [s.features for s in summaries]
    rates = [100.0 * s.rate for s in summaries]
    errs = [100.0 * s.stddev for s in summaries]
    ax.bar(range(len(labels)), rates, yerr=errs, capsize=4, color="#4878d0")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("incoherent pairs (%)")
    ax.set_title("incoherence rate by probed features")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_confidence_figure(rows, path, target: float = 0.99):
    """Detection confidence against probe count, one curve per feature set."""
    fig, ax = plt.subplots(figsize=(7, 4))
    by_label = {}
    for features, rate, n, conf in rows:
        by_label.setdefault((features, rate), []).append((n, conf))
    for (features, rate), points in by_label.items():
        points.sort()
        ax.plot([n for n, _ in points], [c for _, c in points],
                label=f"{features} (rate {rate:.4f})")
    ax.axhline(target, color="grey", linestyle=":", linewidth=1)
    ax.set_xlabel("probes")
    ax.set_ylabel("detection confidence")
    ax.set_ylim(0, 1.02)
    ax.set_title("probes needed to expose an incoherent service")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_dimpact_figure(points, path):
    """P(IP) against alpha, dashed for the dependent scenario, one colour per
    base rate."""
    fig, ax = plt.subplots(figsize=(7, 4))
    series = {}
    for p in points:
        series.setdefault((p.scenario, p.p_b), []).append((p.alpha, p.p_ip))
    colors = {}
    palette = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for (scenario, p_b), pts in sorted(series.items()):
        pts.sort()
        if p_b not in colors:
            colors[p_b] = palette[len(colors) % len(palette)]
        style = "-" if scenario == INDEPENDENCE else "--"
        label = f"p_b={p_b:g} ({scenario})"
        ax.plot([a for a, _ in pts], [v for _, v in pts],
                style, color=colors[p_b], label=label)
    ax.set_xlabel("alpha (disfavoured/favoured approval ratio)")
    ax.set_ylabel("P(incoherent pair)")
    ax.set_title("disparate impact versus pair incoherence")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_accuracy_figure(runs, path):
    """Validation accuracy per epoch, one faint line per model seed."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for run in runs:
        ax.plot([s.epoch for s in run.history],
                [s.val_accuracy for s in run.history],
                color="#4878d0", alpha=0.35, linewidth=1)
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation accuracy")
    ax.set_title(f"training runs ({len(runs)} seeds)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# -- text summary --------------------------------------------------------------

def replication_report(result, target: float = 0.99,
                       reference_counts=None, reference_note: str = "") -> str:
    """Human-readable digest of an experiment result.

    reference_counts, when given, is a features-label -> count mapping of
    previously published probe budgets to print beside ours; the closed-form
    counts here assume independent fixed-rate pair tests, so the two columns
    are expected to differ."""
    lines = []
    lines.append(f"models trained      : {len(result.runs)}")
    lines.append(f"validation accuracy : {result.accuracy_mean():.4f} "
                 f"+/- {result.accuracy_std():.4f}")
    lines.append("")
    lines.append(f"{'features':<28}{'pairs':>8}{'IPs':>7}{'rate':>10}{'sd':>10}")
    summaries = result.probe_summaries()
    for s in summaries:
        lines.append(f"{s.features:<28}{s.pairs_tested:>8}{s.ips_found:>7}"
                     f"{s.rate:>10.4f}{s.stddev:>10.4f}")
    lines.append("")
    header = f"probes needed for {target:.0%} detection confidence"
    if reference_counts:
        lines.append(f"{header} (closed form vs reference):")
    else:
        lines.append(f"{header}:")
    for s in summaries:
        ours = f"{queries_needed(s.rate, target):>8}" if s.rate > 0.0 else f"{'never':>8}"
        if reference_counts and s.features in reference_counts:
            lines.append(f"  {s.features:<26}{ours}{reference_counts[s.features]:>10}")
        else:
            lines.append(f"  {s.features:<26}{ours}")
    if reference_counts and reference_note:
        lines.append("")
        lines.append(reference_note)
    return "\n".join(lines) + "\n"
