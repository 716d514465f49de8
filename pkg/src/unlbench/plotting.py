"""Static SVG figures: per-method protocol boxplots and W2 summaries."""

from __future__ import annotations

import csv
from collections import OrderedDict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sweep import METRICS, PROTOCOLS  # noqa: E402

PROTOCOL_STYLE = {
    "common_practice": {"color": "#d95f02", "label": "1 training seed"},
    "recommended": {"color": "#1b9e77", "label": "many training seeds"},
}
RC = {
    "svg.hashsalt": "unlbench",  # stable element ids across runs
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def box_stats(entry: dict, label: str) -> dict:
    """bxp input built from our own quantiles; whiskers span the full range."""
    q = entry["quantiles"]
    return {"label": label, "whislo": q["min"], "q1": q["q25"], "med": q["q50"],
            "q3": q["q75"], "whishi": q["max"], "fliers": []}


def _index(analysis: dict):
    """(target_slug, metric) -> method -> protocol -> entry."""
    out: OrderedDict = OrderedDict()
    for e in analysis["entries"]:
        slug = f"{e['target_kind']}-{e['target_id']}"
        out.setdefault((slug, e["metric"]), OrderedDict()).setdefault(e["method"], {})[e["protocol"]] = e
    return out


def protocol_boxplot(by_method: dict, metric: str, slug: str, path: Path) -> None:
    methods = list(by_method)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(1.1 * len(methods) + 2.0, 3.2))
        width = 0.35
        for k, proto in enumerate(PROTOCOLS):
            stats, pos = [], []
            for m_idx, m in enumerate(methods):
                if proto in by_method[m]:
                    stats.append(box_stats(by_method[m][proto], m))
                    pos.append(m_idx + (k - 0.5) * width)
            if not stats:
                continue
            style = PROTOCOL_STYLE[proto]
            ax.bxp(stats, positions=pos, widths=width * 0.9, showfliers=False, patch_artist=True,
                   boxprops={"facecolor": style["color"], "alpha": 0.6},
                   medianprops={"color": "k"}, manage_ticks=False)
            ax.plot([], [], color=style["color"], lw=6, alpha=0.6, label=style["label"])
        ref = by_method.get("retrain", {})
        ref = ref.get("recommended") or ref.get("common_practice")
        if ref is not None:
            for key in ("q25", "q50", "q75"):
                ax.axhline(ref["quantiles"][key], color="k", lw=0.8,
                           ls="-" if key == "q50" else "--", zorder=0)
        ax.set_xticks(range(len(methods)))
        ax.set_xticklabels(methods, rotation=20)
        ax.set_ylabel(metric.replace("_", " "))
        ax.set_title(slug)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        _save(fig, path)


def w2_summary(analysis: dict, path: Path) -> None:
    """Per metric, a box per method over targets of W2(common practice, recommended)."""
    dists: OrderedDict = OrderedDict((m, OrderedDict()) for m in METRICS)
    for e in analysis["entries"]:
        if e["protocol"] == "common_practice" and "w2_vs_other_protocol" in e:
            dists[e["metric"]].setdefault(e["method"], []).append(e["w2_vs_other_protocol"])
    with plt.rc_context(RC):
        fig, axes = plt.subplots(2, 2, figsize=(9.0, 6.0), squeeze=False)
        for ax, metric in zip(axes.ravel(), METRICS):
            data = dists[metric]
            if data:
                ax.boxplot(list(data.values()), whis=(0, 100), showfliers=False)
                ax.set_xticks(range(1, len(data) + 1))
                ax.set_xticklabels(list(data), rotation=20)
            else:
                ax.text(0.5, 0.5, "only one protocol present", ha="center", transform=ax.transAxes)
            ax.set_title(metric.replace("_", " "))
            ax.set_ylabel("W2")
        fig.tight_layout()
        _save(fig, path)


def write_report(analysis: dict, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for (slug, metric), by_method in _index(analysis).items():
        path = out / f"box_{metric}_{slug}.svg"
        protocol_boxplot(by_method, metric, slug, path)
        written.append(path)
    path = out / "w2_summary.svg"
    w2_summary(analysis, path)
    written.append(path)

    path = out / "summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target_kind", "target_id", "method", "protocol", "metric", "I", "J", "min", "q25",
                    "q50", "q75", "max", "v_total", "v_between", "v_within", "w2_vs_other_protocol"])
        for e in analysis["entries"]:
            q = e["quantiles"]
            w.writerow([e["target_kind"], e["target_id"], e["method"], e["protocol"], e["metric"],
                        e["I"], e["J"], *(repr(q[k]) for k in ("min", "q25", "q50", "q75", "max")),
                        repr(e["v_total"]), repr(e["v_between"]), repr(e["v_within"]),
                        repr(e["w2_vs_other_protocol"]) if "w2_vs_other_protocol" in e else ""])
    written.append(path)
    return written
