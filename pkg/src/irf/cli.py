"""Command-line entry point: ``irf fit | simulate | evaluate | select-k``.

Every artifact embeds the resolved run configuration and a format version.
Execution settings that cannot change results (``--threads``, output paths)
are left out of the embedded configuration, so identical settings give
byte-identical files.

Exit status is 0 on success, 2 on invalid input (one ``error: <reason>``
line on stderr) and 1 on an internal failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import metrics, pipeline
from .data import DataError, Dataset, FeatureGrouping, load_csv, load_grouping, write_csv
from .experiments import aggregate, run_simulation
from .forest import Forest, ForestParams
from .pipeline import IrfError, IrfParams, IrfResult
from .rit import RitParams
from .simgen import scenario
from .tree import TreeParams

log = logging.getLogger("irf")

ARTIFACT_VERSION = 1
METRICS_FORMAT = "irf-metrics"
WEIGHTS_FORMAT = "irf-weights"
SIMULATION_FORMAT = "irf-simulation"
EVALUATION_FORMAT = "irf-evaluation"
SELECT_K_FORMAT = "irf-select-k"


class UsageError(ValueError):
    """Invalid command-line input."""


# ----------------------------------------------------------------- output


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _num(v):
    """JSON-safe float: NaN and infinities become None."""
    v = float(v)
    return v if math.isfinite(v) else None


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def write_table(path: Path, fmt: str, config: dict, header, rows) -> None:
    """CSV with ``#`` comment lines carrying the format and the config."""
    buf = io.StringIO()
    buf.write(f"# format: {fmt}\n# version: {ARTIFACT_VERSION}\n")
    buf.write("# config: " + json.dumps(config, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_table(path) -> tuple[dict, list[dict]]:
    """Inverse of ``write_table``: ``(config, rows)`` with string cells."""
    config, body = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# config: "):
            config = json.loads(line[len("# config: "):])
        elif not line.startswith("#"):
            body.append(line)
    return config, list(csv.DictReader(body))


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ----------------------------------------------------------------- params


def _add_irf_flags(p: argparse.ArgumentParser, seed_required: bool) -> None:
    g = p.add_argument_group("iRF parameters")
    g.add_argument("--k", type=int, default=5, help="number of re-weighting iterations")
    g.add_argument("--b", type=int, default=20, help="number of outer bootstrap replicates")
    g.add_argument("--ntree", type=int, default=500)
    g.add_argument("--mtry", type=int, default=None, help="default: floor(sqrt(p))")
    g.add_argument("--min-node-size", type=int, default=1)
    g.add_argument("--max-depth", type=int, default=None)
    g.add_argument("--rit-m", type=int, default=500)
    g.add_argument("--rit-d", type=int, default=5)
    g.add_argument("--rit-nchild", type=int, default=2)
    g.add_argument("--class", dest="class_of_interest", type=int, default=1, choices=(0, 1))
    g.add_argument("--weight-floor", type=float, default=0.0,
                   help="added to every importance before it becomes a weight")
    g.add_argument("--seed", type=int, required=seed_required, default=0)
    g.add_argument("--threads", type=int, default=1)


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--response", default="y", help="name of the 0/1 response column")
    p.add_argument("--id-col", action="store_true", help="ignore the first column")


def _irf_params(args, grouping: FeatureGrouping | None = None) -> IrfParams:
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must lie in [0, 2^64)")
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    tree = TreeParams(mtry=args.mtry, min_node_size=args.min_node_size, max_depth=args.max_depth)
    return IrfParams(
        K=args.k,
        B=args.b,
        forest=ForestParams(ntree=args.ntree, tree=tree),
        rit=RitParams(M=args.rit_m, D=args.rit_d, n_child=args.rit_nchild),
        class_of_interest=args.class_of_interest,
        grouping=grouping,
        seed=args.seed,
        weight_floor=args.weight_floor,
    )


def _load(path, args) -> Dataset:
    return load_csv(path, args.response, id_col=args.id_col)


def _output_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------- fit


def _interaction_list(items, group_names) -> list:
    return [
        {"features": [group_names[i] for i in S], "order": len(S), "stability": float(v)}
        for S, v in items
    ]


def _groups_dict(grouping: FeatureGrouping, feature_names) -> dict:
    out = {name: [] for name in grouping.group_names}
    for j, g in enumerate(grouping.group_of):
        out[grouping.group_names[g]].append(feature_names[j])
    return out


def fit_metrics(result: IrfResult, train: Dataset, test: Dataset | None) -> dict:
    """Prediction metrics of the final forest.

    The MCC threshold is chosen on out-of-bag training votes, so training
    rows never score themselves.
    """
    forest = result.final_forest
    cls = result.params.class_of_interest
    out = {
        "train_n": train.n,
        "train_prevalence": float(train.labels.mean()),
        "oob_error": _num(forest.oob_error(train)),
        "n_interactions": len(result.stability),
    }
    if test is None:
        return out
    scores = forest.predict_proba(test.features)
    if cls == 0:
        scores = 1.0 - scores
    test_sl = metrics.ScoredLabels(scores, test.labels, positive_class=cls)
    out["test_n"] = test.n
    if test_sl.positive.any():
        out["test_auc_pr"] = metrics.auc_pr(test_sl)
    if test_sl.positive.any() and not test_sl.positive.all():
        out["test_auc_roc"] = metrics.auc_roc(test_sl)
    oob = forest.oob_proba(train)
    seen = ~np.isnan(oob)
    if cls == 0:
        oob = 1.0 - oob
    train_sl = metrics.ScoredLabels(oob[seen], train.labels[seen], positive_class=cls)
    if train_sl.positive.any() and not train_sl.positive.all():
        th = metrics.best_mcc(train_sl, test_sl)
        out.update(mcc_threshold=_num(th.threshold), test_mcc=th.mcc, test_ppv=th.ppv)
    return out


def result_document(result: IrfResult, config: dict, fit_metrics_: dict, feature_names,
                    stability: dict | None = None) -> dict:
    """The interactions JSON document; ``stability`` overrides the result's
    own map (used for the display list)."""
    grouping = result.params.grouping or FeatureGrouping.identity(feature_names)
    items = result.ranked() if stability is None else sorted(
        stability.items(),
        key=lambda kv: (-kv[1], -len(kv[0]), [result.group_names[i] for i in kv[0]]),
    )
    return {
        "format": pipeline.RESULT_FORMAT,
        "version": pipeline.RESULT_VERSION,
        "config": config,
        "params": result.params.to_dict(),
        "groups": _groups_dict(grouping, feature_names),
        "weights_per_iteration": [[float(v) for v in w] for w in result.weights_per_iteration],
        "interactions": _interaction_list(items, result.group_names),
        "metrics": fit_metrics_,
    }


def cmd_fit(args) -> int:
    train = _load(args.train, args)
    test = _load(args.test, args) if args.test else None
    if test is not None and test.feature_names != train.feature_names:
        raise UsageError("test columns differ from training columns")
    grouping = load_grouping(args.grouping, train.feature_names) if args.grouping else None
    params = _irf_params(args, grouping)
    params.forest.tree.resolve_mtry(train.p)
    if args.display_cutoff < 0 or args.display_cutoff > 1:
        raise UsageError("--display-cutoff must lie in [0, 1]")
    out = _output_dir(args.out)

    config = {
        "command": "fit",
        "params": params.to_dict(),
        "inputs": {
            "train": {"name": Path(args.train).name, "sha256": _file_digest(args.train)},
            "test": None if not args.test else
            {"name": Path(args.test).name, "sha256": _file_digest(args.test)},
            "grouping": None if not args.grouping else
            {"name": Path(args.grouping).name, "sha256": _file_digest(args.grouping)},
            "response": args.response,
            "id_col": args.id_col,
        },
        "display_cutoff": args.display_cutoff,
    }
    result = pipeline.fit(train, params, threads=args.threads)
    fm = fit_metrics(result, train, test)

    doc = result_document(result, config, fm, train.feature_names)
    (out / "interactions.json").write_text(_dumps(doc), encoding="utf-8")
    display = pipeline.prune_display(result.stability, args.display_cutoff)
    doc_d = result_document(result, config, fm, train.feature_names, stability=display)
    (out / "interactions_display.json").write_text(_dumps(doc_d), encoding="utf-8")

    forest_doc = result.final_forest.to_dict()
    forest_doc["config"] = config
    (out / "forest.json").write_text(
        json.dumps(forest_doc, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")

    rows = [(k + 1, name, w[j]) for k, w in enumerate(result.weights_per_iteration)
            for j, name in enumerate(train.feature_names)]
    write_table(out / "weights.csv", WEIGHTS_FORMAT, config, ["iteration", "feature", "weight"], rows)

    mrows = [(name, "", "" if v is None else v) for name, v in sorted(fm.items())]
    for s in sorted({len(S) for S in result.stability}):
        sub = [v for S, v in result.stability.items() if len(S) == s]
        mrows.append(("n_interactions", s, len(sub)))
        mrows.append(("max_stability", s, max(sub)))
    write_table(out / "metrics.csv", METRICS_FORMAT, config, ["metric", "order", "value"], mrows)

    top = result.ranked()[:10]
    for S, v in top:
        print(f"{v:.2f}\t{'_'.join(result.group_names[i] for i in S)}")
    return 0


# ----------------------------------------------------------------- simulate


def _tidy(row: dict):
    """Split ``metric_order`` keys into (metric, order)."""
    for key, value in row.items():
        if key in ("scenario", "replicate", "k", "replicates"):
            continue
        head, _, tail = key.rpartition("_")
        if head and tail.isdigit():
            yield head, int(tail), value
        else:
            yield key, "", value


def cmd_simulate(args) -> int:
    if args.replicates < 1:
        raise UsageError("--replicates must be >= 1")
    try:
        ks = sorted({int(k) for k in args.ks.split(",") if k.strip()})
    except ValueError:
        raise UsageError(f"--ks must be a comma-separated list of integers: {args.ks}") from None
    if not ks or ks[0] < 1:
        raise UsageError("--ks needs at least one iteration count >= 1")
    try:
        scenario(args.scenario, 0, n_train=2, n_test=1)
    except KeyError:
        raise UsageError(f"unknown scenario: {args.scenario}") from None
    params = _irf_params(args)
    out = _output_dir(args.out)
    config = {
        "command": "simulate",
        "scenario": args.scenario,
        "replicates": args.replicates,
        "ks": ks,
        "n_train": args.n_train,
        "params": {k: v for k, v in params.to_dict().items() if k != "K"},
    }
    rows = run_simulation(args.scenario, args.replicates, ks, params, args.seed,
                          threads=args.threads, n_train=args.n_train)
    per_rep = [(r["scenario"], r["replicate"], r["k"], m, o, v) for r in rows for m, o, v in _tidy(r)]
    write_table(out / "replicates.csv", SIMULATION_FORMAT, config,
                ["scenario", "replicate", "k", "metric", "order", "value"], per_rep)
    agg = aggregate(rows)
    summary = [(a["scenario"], a["k"], m, o, v, a["replicates"]) for a in agg for m, o, v in _tidy(a)]
    write_table(out / "summary.csv", SIMULATION_FORMAT, config,
                ["scenario", "k", "metric", "order", "value", "replicates"], summary)
    if args.export_data:
        from ._random import derive_seed
        for r in range(args.replicates):
            sc = scenario(args.scenario, derive_seed(args.seed, r), n_train=args.n_train)
            write_csv(sc.train, out / f"rep{r}_train.csv")
            write_csv(sc.test, out / f"rep{r}_test.csv")
            (out / f"rep{r}_truth.json").write_text(_dumps(
                {"active": [sc.train.feature_names[i] for i in sorted(sc.truth.active)],
                 "scenario": sc.params}), encoding="utf-8")
    for a in agg:
        print(f"k={a['k']}\tauc_pr={a['auc_pr']:.3f}\tinteraction_auc={a['interaction_auc']:.3f}"
              f"\tfull_rule={a['full_rule_recovered']:.2f}")
    return 0


# ----------------------------------------------------------------- evaluate


def _read_json(path, what: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise UsageError(f"{what} file is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{what} file has the wrong schema")
    return doc


def load_interactions(path) -> dict:
    doc = _read_json(path, "interactions")
    if doc.get("format") != pipeline.RESULT_FORMAT or doc.get("version") != pipeline.RESULT_VERSION:
        raise UsageError("interactions file has an unsupported format or version")
    try:
        for it in doc["interactions"]:
            if not it["features"] or not isinstance(it["stability"], (int, float)):
                raise TypeError
        doc["groups"], doc["metrics"]
    except (KeyError, TypeError):
        raise UsageError("interactions file has the wrong schema") from None
    return doc


def load_forest(path) -> Forest:
    doc = _read_json(path, "forest")
    try:
        return Forest.from_dict(doc)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"forest file is invalid: {e}") from None


def _grouping_from(groups: dict, feature_names) -> FeatureGrouping:
    names = list(groups)
    where = {}
    for g, members in enumerate(groups.values()):
        for f in members:
            where[f] = g
    missing = [f for f in feature_names if f not in where]
    if missing or len(where) != len(feature_names):
        raise UsageError("interactions file groups do not match the forest's features")
    return FeatureGrouping(np.array([where[f] for f in feature_names]), names)


def cmd_evaluate(args) -> int:
    forest = load_forest(args.forest)
    doc = load_interactions(args.interactions)
    data = _load(args.data, args)
    if data.feature_names != forest.feature_names:
        raise UsageError("data columns differ from the forest's features")
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    grouping = _grouping_from(doc["groups"], forest.feature_names)
    index = {name: g for g, name in enumerate(grouping.group_names)}
    interactions = doc["interactions"] if args.top is None else doc["interactions"][: args.top]
    prevalence = doc["metrics"].get("train_prevalence")
    if prevalence is None:
        prevalence = float(data.labels.mean())
    out = _output_dir(args.out)
    config = {
        "command": "evaluate",
        "inputs": {
            "forest": _file_digest(args.forest),
            "interactions": _file_digest(args.interactions),
            "data": {"name": Path(args.data).name, "sha256": _file_digest(args.data)},
        },
        "seed": args.seed,
        "repeats": args.repeats,
        "top": args.top,
        "train_prevalence": prevalence,
    }
    has_pos = bool(data.labels.any())
    cond_rows, cond_pred, perm_rows = [], [], []
    for rank, it in enumerate(interactions, start=1):
        try:
            S = sorted(index[name] for name in it["features"])
        except KeyError as e:
            raise UsageError(f"interaction names an unknown feature: {e.args[0]}") from None
        label = "_".join(it["features"])
        g = None if grouping.is_identity else grouping
        pred = metrics.conditional_prediction(forest, data.features, S, prevalence, g)
        cond_pred.extend((label, i, v) for i, v in enumerate(pred))
        auc = metrics.auc_pr(metrics.ScoredLabels(pred, data.labels)) if has_pos else float("nan")
        cond_rows.append((rank, label, len(S), it["stability"], auc))
        perm = (metrics.permutation_importance(forest, data, S, seed=args.seed,
                                               repeats=args.repeats, grouping=g)
                if has_pos else float("nan"))
        perm_rows.append((rank, label, len(S), it["stability"], perm))
    header = ["rank", "interaction", "order", "stability", "auc_pr"]
    write_table(out / "conditional_prediction.csv", EVALUATION_FORMAT, config, header, cond_rows)
    write_table(out / "permutation_importance.csv", EVALUATION_FORMAT, config, header, perm_rows)
    write_table(out / "conditional_prediction_rows.csv", EVALUATION_FORMAT, config,
                ["interaction", "row", "prediction"], cond_pred)
    print(f"evaluated {len(interactions)} interactions")
    return 0


# ----------------------------------------------------------------- select-k


def cmd_select_k(args) -> int:
    train = _load(args.train, args)
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    params = _irf_params(args)
    params.forest.tree.resolve_mtry(train.p)
    means = pipeline.cv_scores(train, args.k, args.folds, params, threads=args.threads)
    best = int(np.flatnonzero(means >= means.max() - args.tol)[0]) + 1
    if args.out:
        out = _output_dir(args.out)
        config = {
            "command": "select-k",
            "params": {k: v for k, v in params.to_dict().items() if k != "K"},
            "k_max": args.k,
            "folds": args.folds,
            "tol": args.tol,
            "train": {"name": Path(args.train).name, "sha256": _file_digest(args.train)},
            "selected_k": best,
        }
        write_table(out / "select_k.csv", SELECT_K_FORMAT, config, ["k", "cv_auc_pr"],
                    [(k + 1, m) for k, m in enumerate(means)])
    print(f"k={best}")
    return 0


# ----------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irf", description="Iterative random forests.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit iRF and write interactions, forest and weights")
    p.add_argument("--train", required=True)
    p.add_argument("--test")
    p.add_argument("--grouping", help="feature,group CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--display-cutoff", type=float, default=0.5,
                   help="stability at which a superset hides its subsets in the display list")
    _add_data_flags(p)
    _add_irf_flags(p, seed_required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="replicated runs of a named simulation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--ks", default="1,2,3,4,5")
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--export-data", action="store_true",
                   help="also write each replicate's train/test CSVs and truth")
    _add_irf_flags(p, seed_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="conditional prediction and permutation importance")
    p.add_argument("--forest", required=True)
    p.add_argument("--interactions", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--top", type=int, default=None, help="only the first N interactions")
    _add_data_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("select-k", help="choose K by cross-validated AUC-PR")
    p.add_argument("--train", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--tol", type=float, default=0.005)
    p.add_argument("--out")
    _add_data_flags(p)
    _add_irf_flags(p, seed_required=False)
    p.set_defaults(func=cmd_select_k)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, DataError, IrfError, ValueError, FileNotFoundError) as e:
        reason = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"error: {reason}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(e).__name__}: {e}".splitlines()[0], file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
