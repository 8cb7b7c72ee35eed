"""Command-line front end.

Thin adapters only: every command loads data, calls the library, and
writes files.  Outputs are collected in memory and flushed together, so
a failing command leaves nothing half-written.  All generated files are
deterministic under a fixed seed and carry the seed in a header comment.

Exit codes: 0 ok, 1 usage, 2 data, 3 convergence, 4 internal.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from . import bnn as bnn_mod
from . import svm as svm_mod
from .data_io import (
    DatasetManifest,
    SynthCohortSpec,
    attach_clinical,
    export_cohort,
    generate_cohort,
    load_directory,
)
from .errors import EegFusionError, UsageError
from .evaluate import (
    COMPARISON_COLUMNS,
    EvalConfig,
    FeatureTable,
    HybridClassifier,
    SvmClassifier,
    _inner_folds,
    build_loso_plan,
    comparison_table,
    make_classifier,
    run_pipeline,
)
from .plots import bar_chart_svg, roc_curve_svg
from .swarm import SwarmConfig, trace_csv


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class OutputSet:
    """Buffered writes; nothing lands on disk until the command succeeds."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files = {}

    def add(self, name: str, content: str):
        self.files[name] = content

    def flush(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name, content in sorted(self.files.items()):
            (self.out_dir / name).write_text(content)
        return sorted(self.files)


def _build_parser() -> _Parser:
    parser = _Parser(prog="eegfusion", description=__doc__)
    parser.add_argument("--config", help="key = value config file with [section] headers")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--jobs", type=int, help="parallel outer folds")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--data", help="dataset root (directory layout with a manifest)")
        p.add_argument("--synth", action="store_true", help="use the synthetic cohort")
        p.add_argument("--task", help="A_vs_E | CD_vs_E | AB_vs_CDE | custom")
        p.add_argument("--feature-set", choices=("svm4", "bnn4", "union"))
        return p

    add("extract", "write per-epoch features as CSV")
    p_eval = add("evaluate", "leave-one-subject-out evaluation and reports")
    p_eval.add_argument(
        "--classifier", help="knn | svm | rbf | bnn | hybrid | all", default=None
    )
    add("train-svm", "fit a calibrated margin classifier on the full dataset")
    add("train-bnn", "evidence-select and fit the network on the full dataset")
    add("select", "swarm feature selection report")
    p_synth = sub.add_parser("synth", help="generate and export a synthetic cohort")
    p_synth.add_argument("--task", default="A_vs_E")
    p_rep = sub.add_parser("report", help="rebuild comparison table and plots from report CSVs")
    p_rep.add_argument("reports", nargs="+", help="report CSV files from `evaluate`")
    return parser


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


class RunConfig:
    """Merged view of config file and flags (flags win)."""

    def __init__(self, args):
        self.parser = configparser.ConfigParser()
        if getattr(args, "config", None):
            read = self.parser.read(args.config)
            if not read:
                raise UsageError(f"config file not found: {args.config}")
        self.args = args

    def _get(self, section, key, fallback=None):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key)
        return fallback

    def _flag(self, name, section, key, fallback=None, cast=str):
        value = getattr(self.args, name, None)
        if value is not None and value is not False:
            return value
        raw = self._get(section, key)
        if raw is None:
            return fallback
        return cast(raw)

    @property
    def seed(self) -> int:
        return int(self._flag("seed", "run", "seed", 0, int))

    @property
    def out_dir(self) -> Path:
        return Path(self._flag("out", "run", "out", "out", str))

    @property
    def jobs(self) -> int:
        return int(self._flag("jobs", "run", "jobs", 1, int))

    @property
    def task(self) -> str:
        return str(self._flag("task", "run", "task", "A_vs_E", str))

    @property
    def feature_set(self) -> str:
        return str(self._flag("feature_set", "run", "feature_set", "union", str))

    @property
    def classifier(self) -> str:
        return str(self._flag("classifier", "run", "classifier", "svm", str))

    @property
    def repetitions(self):
        raw = self._get("cv", "repetitions", "10")
        return tuple(int(v) for v in raw.split())

    def synth_spec(self) -> SynthCohortSpec:
        g = lambda key, fb, cast: cast(self._get("synth", key, fb))
        return SynthCohortSpec(
            subjects_per_class=g("subjects_per_class", 10, int),
            epochs_per_subject=g("epochs_per_subject", 20, int),
            rate=g("rate", 256.0, float),
            epoch_length=g("epoch_length", 1024, int),
            snr=g("snr", 1.0, float),
            seed=int(self._get("synth", "seed", self.seed)),
        )

    def eval_config(self) -> EvalConfig:
        def grid(section, key, fallback):
            raw = self._get(section, key)
            if raw is None:
                return fallback
            return tuple(float(v) for v in raw.split())

        swarm = SwarmConfig(
            particles=int(self._get("swarm", "particles", 10)),
            iterations=int(self._get("swarm", "iterations", 20)),
            inertia=float(self._get("swarm", "inertia", 0.72)),
            cognitive=float(self._get("swarm", "cognitive", 1.49)),
            social=float(self._get("swarm", "social", 1.49)),
            seed=self.seed,
        )
        return EvalConfig(
            inner_k=int(self._get("cv", "inner_folds", 5)),
            threshold_steps=int(self._get("cv", "threshold_steps", 100)),
            knn_k=int(self._get("knn", "k", 5)),
            rbf_centers=int(self._get("rbf", "centers", 8)),
            svm_cost_grid=grid("svm", "cost_grid", (0.1, 1.0, 10.0, 100.0)),
            svm_gamma_grid=grid("svm", "gamma_grid", (0.01, 0.1, 1.0, 10.0)),
            svm_max_passes=int(self._get("svm", "max_passes", 200)),
            bnn_candidates=tuple(
                int(v) for v in self._get("bnn", "candidates", "1 2 4 8").split()
            ),
            bnn_max_iter=int(self._get("bnn", "max_iter", 2000)),
            bnn_restarts=int(self._get("bnn", "restarts", 3)),
            bnn_epsilon=float(self._get("bnn", "epsilon", 0.1)),
            swarm=swarm,
            fitness_max_iter=int(self._get("swarm", "fitness_max_iter", 150)),
            max_fitness_folds=int(self._get("swarm", "fitness_folds", 3)),
            jobs=self.jobs,
        )

    def load_table(self) -> FeatureTable:
        args = self.args
        epoch_length = self._get("data", "epoch_length")
        hop = self._get("data", "hop")
        if getattr(args, "synth", False) or (
            not getattr(args, "data", None) and not self._get("data", "root")
        ):
            cohort = generate_cohort(self.synth_spec())
            epoch_length = None  # synthetic epochs are already epoch-sized
        else:
            root = Path(getattr(args, "data", None) or self._get("data", "root"))
            manifest_path = root / "manifest"
            if manifest_path.exists():
                manifest = DatasetManifest.from_file(manifest_path)
                if getattr(args, "task", None):
                    manifest = DatasetManifest(
                        rate=manifest.rate,
                        task=args.task,
                        divisions=manifest.divisions,
                        subjects=manifest.subjects,
                        custom_labels=manifest.custom_labels,
                    )
            else:
                manifest = DatasetManifest(
                    rate=float(self._get("data", "rate", 173.61)), task=self.task
                )
            cohort = load_directory(root, manifest)
            clinical = self._get("data", "clinical")
            if clinical:
                cohort = attach_clinical(cohort, Path(clinical).read_text())
        return FeatureTable.from_cohort(
            cohort,
            feature_set=self.feature_set,
            epoch_length=int(epoch_length) if epoch_length else None,
            hop=int(hop) if hop else None,
        )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_extract(cfg: RunConfig) -> int:
    table = cfg.load_table()
    out = OutputSet(cfg.out_dir)
    lines = [f"# seed = {cfg.seed}", f"# feature_set = {cfg.feature_set}"]
    lines.append("subject_id,label," + ",".join(table.schema))
    for subject, label, row in zip(table.subjects, table.labels, table.matrix):
        values = ",".join(repr(float(v)) for v in row)
        lines.append(f"{subject},{2 * int(label)},{values}")
    out.add("features.csv", "\n".join(lines) + "\n")
    written = out.flush()
    print(f"wrote {', '.join(written)} to {cfg.out_dir}")
    return 0


def cmd_synth(cfg: RunConfig) -> int:
    cohort = generate_cohort(cfg.synth_spec())
    export_cohort(cohort, cfg.out_dir, task=cfg.args.task)
    print(
        f"wrote {len(cohort)} epochs from {len(cohort.subjects())} subjects "
        f"to {cfg.out_dir}"
    )
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    table = cfg.load_table()
    eval_cfg = cfg.eval_config()
    names = (
        list(COMPARISON_COLUMNS)
        if cfg.classifier == "all"
        else [cfg.classifier]
    )
    out = OutputSet(cfg.out_dir)
    accuracy_by = {name: {} for name in names}
    for rep in cfg.repetitions:
        seed = cfg.seed + rep
        plan = build_loso_plan(table, inner_k=eval_cfg.inner_k, seed=seed)
        for name in names:
            report = run_pipeline(table, name, plan, eval_cfg, seed=seed)
            accuracy_by[name][rep] = report.accuracy
            prefix = f"report_{name}_rep{rep}"
            out.add(f"{prefix}.csv", f"# repetition = {rep}\n" + report.to_csv())
            out.add(f"roc_{name}_rep{rep}.csv", report.roc_csv())
            if rep == cfg.repetitions[0]:
                out.add(
                    f"roc_{name}.svg",
                    f"<!-- seed = {seed} -->\n"
                    + roc_curve_svg(report.roc.points, report.roc.auc, title=f"ROC {name}"),
                )
    table_text = f"# seed = {cfg.seed}\n" + comparison_table(accuracy_by)
    out.add("comparison_table.txt", table_text)
    means = [float(np.mean(list(accuracy_by[n].values()))) for n in names]
    out.add(
        "accuracy_bars.svg",
        f"<!-- seed = {cfg.seed} -->\n"
        + bar_chart_svg(names, means, title="Mean LOSO accuracy (%)"),
    )
    written = out.flush()
    print(f"wrote {', '.join(written)} to {cfg.out_dir}")
    return 0


def cmd_train_svm(cfg: RunConfig) -> int:
    table = cfg.load_table()
    eval_cfg = cfg.eval_config()
    label_of = {s: table.subject_label(s) for s in table.subject_ids()}
    folds_subj = _inner_folds(tuple(table.subject_ids()), label_of, eval_cfg.inner_k, cfg.seed)
    positions = {s: np.nonzero(table.subjects == s)[0] for s in table.subject_ids()}
    inner = [
        (
            np.concatenate([positions[s] for s in tr]),
            np.concatenate([positions[s] for s in va]),
        )
        for tr, va in folds_subj
    ]
    clf = SvmClassifier(
        cost_grid=eval_cfg.svm_cost_grid,
        gamma_grid=eval_cfg.svm_gamma_grid,
        max_passes=eval_cfg.svm_max_passes,
    )
    clf.fit(table.matrix, table.labels, inner_folds=inner, seed=cfg.seed)
    out = OutputSet(cfg.out_dir)
    out.add("svm_model.json", clf.model.to_json() + "\n")
    out.flush()
    cost, gamma = clf.chosen
    print(f"wrote svm_model.json (cost={cost}, gamma={gamma}) to {cfg.out_dir}")
    return 0


def cmd_train_bnn(cfg: RunConfig) -> int:
    table = cfg.load_table()
    eval_cfg = cfg.eval_config()
    clf = make_classifier("bnn", eval_cfg)
    clf.fit(table.matrix, table.labels, seed=cfg.seed)
    out = OutputSet(cfg.out_dir)
    out.add("bnn_model.json", clf.model.to_json() + "\n")
    out.flush()
    width = clf.model.architecture.n_hidden_units
    print(
        f"wrote bnn_model.json (width={width}, evidence={clf.model.evidence.total:.3f}) "
        f"to {cfg.out_dir}"
    )
    return 0


def cmd_select(cfg: RunConfig) -> int:
    table = cfg.load_table()
    eval_cfg = cfg.eval_config()
    label_of = {s: table.subject_label(s) for s in table.subject_ids()}
    folds_subj = _inner_folds(tuple(table.subject_ids()), label_of, eval_cfg.inner_k, cfg.seed)
    positions = {s: np.nonzero(table.subjects == s)[0] for s in table.subject_ids()}
    inner = [
        (
            np.concatenate([positions[s] for s in tr]),
            np.concatenate([positions[s] for s in va]),
        )
        for tr, va in folds_subj
    ]
    clf = HybridClassifier(
        swarm=eval_cfg.swarm,
        fitness_max_iter=eval_cfg.fitness_max_iter,
        max_fitness_folds=eval_cfg.max_fitness_folds,
    )
    clf.fit(table.matrix, table.labels, inner_folds=inner, seed=cfg.seed)
    out = OutputSet(cfg.out_dir)
    selected = [name for name, keep in zip(table.schema, clf.mask) if keep]
    lines = [
        f"# seed = {cfg.seed}",
        "selected_features," + ";".join(selected),
        f"fitness,{clf.swarm_result.fitness!r}",
    ]
    out.add("selection.csv", "\n".join(lines) + "\n")
    out.add("fitness_trace.csv", f"# seed = {cfg.seed}\n" + trace_csv(clf.swarm_result))
    written = out.flush()
    print(f"wrote {', '.join(written)} to {cfg.out_dir}")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    accuracy_by = {}
    roc_done = set()
    out = OutputSet(cfg.out_dir)
    for path in cfg.args.reports:
        text = Path(path).read_text()
        meta = {"repetition": 0}
        accuracy = None
        for line in text.splitlines():
            if line.startswith("# repetition"):
                meta["repetition"] = int(line.split("=")[1])
            elif line.startswith("# classifier"):
                meta["classifier"] = line.split("=")[1].strip()
            elif line.startswith("accuracy_pct,"):
                accuracy = float(line.split(",")[1])
        if "classifier" not in meta or accuracy is None:
            raise UsageError(f"{path} is not an evaluation report CSV")
        accuracy_by.setdefault(meta["classifier"], {})[meta["repetition"]] = accuracy
        roc_done.add(meta["classifier"])
    out.add("comparison_table.txt", f"# seed = {cfg.seed}\n" + comparison_table(accuracy_by))
    names = sorted(accuracy_by)
    means = [float(np.mean(list(accuracy_by[n].values()))) for n in names]
    out.add(
        "accuracy_bars.svg",
        f"<!-- seed = {cfg.seed} -->\n" + bar_chart_svg(names, means, title="Mean LOSO accuracy (%)"),
    )
    written = out.flush()
    print(f"wrote {', '.join(written)} to {cfg.out_dir}")
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "synth": cmd_synth,
    "evaluate": cmd_evaluate,
    "train-svm": cmd_train_svm,
    "train-bnn": cmd_train_bnn,
    "select": cmd_select,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = RunConfig(args)
        return COMMANDS[args.command](cfg)
    except EegFusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
