from __future__ import annotations

"""
Command-line entry point.

Responsibilities
---------------
- Parse the experiment config (bionic.schema) and apply flag overrides
- Load datasets, fit / reuse models, write result files with provenance
- Map failures to exit codes: 1 = invalid input, 2 = numerical failure

Usage
-----
# Fit under the semi-supervised regime and write the model file:
python -m bionic.main fit --config exp.json --regime ss --out run/model.json

# Predict the config's views (or its unlabeled rows) with a fitted model:
python -m bionic.main predict --model run/model.json --config exp.json --out run/pred.csv
python -m bionic.main predict --model run/model.json --config exp.json --unlabeled --out run/test_pred.csv

# Fill missing entries and write <view>.csv plus <view>.var.csv:
python -m bionic.main impute --model run/model.json --config exp.json --out run/imputed

# Sensitivities, relevances and heatmap tables:
python -m bionic.main explain --model run/model.json --config exp.json --out run/explain --plot-data
python -m bionic.main explain --model run/model.json --config exp.json --out run/explain --plot-data --tokens ct=ct_patches.csv

# 10-fold class-stratified CV, and the S / SS / TSS comparison:
python -m bionic.main cv --config exp.json --folds 10 --seed 1 --out run/cv.csv
python -m bionic.main regimes --config exp.json --folds 10 --seed 1 --out run/regimes.csv

# Synthetic data (spec JSON, see bionic.synthetic.SyntheticSpec) and validation:
python -m bionic.main simulate --config sim.json --out data/sim
python -m bionic.main validate --config exp.json

Notes
-----
- Logs are JSON lines on stderr (LOG_FORMAT=text for plain lines); stdout
  carries summaries only.
- Output tables start with a `# bionic config_sha256=... seed=...` line.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .classify import labels_from_proba, proba_from_moments, predict_logits
from .dataset import MultiViewDataset, load_dataset, save_dataset, validate_dataset
from .errors import DataValidationError, NumericalError
from .evaluation import DEFAULT_FOLDS, run_cv, run_regime_experiment
from .impute import impute_dataset
from .inference import REGIMES, fit
from .interpret import global_sensitivity, sensitivity_map, token_relevance, view_relevance
from .io_utils import read_matrix_bin, read_view_csv, write_table_csv, write_view_csv
from .logging_setup import get_logger, setup_logging
from .model import Hyperparams, ModelState
from .schema import ExperimentConfig, load_config
from .state import load_model, save_model
from .synthetic import SyntheticSpec, generate_synthetic, inject_missingness

log = get_logger(__name__, component="cli")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so main() owns the exit code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ---------------------------
# Helpers
# ---------------------------


def _hyper(cfg: ExperimentConfig, args: argparse.Namespace) -> Hyperparams:
    updates: Dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "max_sweeps", None) is not None:
        updates["max_sweeps"] = args.max_sweeps
    if not updates:
        return cfg.hyper
    return Hyperparams.model_validate({**cfg.hyper.model_dump(), **updates})


def _datasets(cfg: ExperimentConfig, n_classes: Optional[int] = None) -> Tuple[MultiViewDataset, Optional[MultiViewDataset]]:
    n_cls = n_classes or cfg.n_classes
    d = load_dataset(cfg.views, cfg.labels, id_column=cfg.id_column, n_classes=n_cls)
    extra = None
    if cfg.unlabeled_views:
        extra = load_dataset(
            cfg.unlabeled_views,
            cfg.unlabeled_labels,
            id_column=cfg.id_column,
            n_classes=d.n_classes,
            id_prefix="u",
        )
    return d, extra


def _provenance(sha: str, seed: int, **extra: Any) -> Dict[str, Any]:
    return {"config_sha256": sha, "seed": seed, **extra}


def _print(obj: Any) -> None:
    print(json.dumps(obj, indent=2, default=str))


def _feature_names(s: ModelState, view: int) -> List[str]:
    return s.preprocess.specs[view].names()


def _token_args(values: Sequence[str]) -> List[Tuple[str, Path]]:
    pairs = []
    for v in values:
        name, sep, path = v.partition("=")
        if not sep or not name or not path:
            raise DataValidationError(f"--tokens expects VIEW=PATH, got {v!r}")
        pairs.append((name, Path(path)))
    return pairs


def _read_tokens(path: Path) -> np.ndarray:
    # rows = tokens/patches in the view's raw embedding space, no id column
    if path.suffix.lower() in {".bmv", ".bin"}:
        return read_matrix_bin(path)
    _, _, values = read_view_csv(path, id_column=None)
    return values


# ---------------------------
# Subcommands
# ---------------------------


def cmd_fit(args: argparse.Namespace) -> int:
    cfg, sha = load_config(args.config)
    h = _hyper(cfg, args)
    regime = (args.regime or cfg.regime).lower()
    d, extra = _datasets(cfg)
    state = fit(d, h, regime=regime, extra_unlabeled=extra)
    state.meta["config_sha256"] = sha
    out = save_model(state, args.out, config_sha256=sha)
    log.info(
        "model written",
        extra={"path": out, "elbo_trace_len": len(state.elbo_trace), "active_h": state.active_h, "regime": regime},
    )
    _print(
        {
            "model": out,
            "regime": regime,
            "sweeps": len(state.elbo_trace),
            "final_elbo": state.elbo_trace[-1],
            "active_h": state.active_h,
            "config_sha256": sha,
        }
    )
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    state = load_model(args.model)
    cfg, sha = load_config(args.config)
    d, extra = _datasets(cfg, n_classes=state.n_classes)
    if args.unlabeled:
        if extra is None:
            raise DataValidationError("--unlabeled needs unlabeled_views in the config")
        d = extra
    mean, var = predict_logits(state, d)
    proba = proba_from_moments(mean, var)
    frame = pd.DataFrame(proba, columns=[f"prob_{c}" for c in range(proba.shape[1])])
    frame.insert(0, "id", list(d.ids))
    frame["pred"] = labels_from_proba(proba)
    out = write_table_csv(args.out, frame, _provenance(state.meta.get("config_sha256") or sha, state.hyper.seed))
    log.info("predictions written", extra={"path": out, "n": d.n})
    return 0


def cmd_impute(args: argparse.Namespace) -> int:
    state = load_model(args.model)
    cfg, _ = load_config(args.config)
    d, _ = _datasets(cfg, n_classes=state.n_classes)
    result = impute_dataset(state, d)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for m, spec in enumerate(result.dataset.specs):
        names = spec.names()
        write_view_csv(out / f"{spec.name}.csv", result.dataset.blocks[m].values, names, ids=list(d.ids))
        write_view_csv(out / f"{spec.name}.var.csv", result.variances[m], names, ids=list(d.ids))
    log.info("imputed views written", extra={"dir": str(out), "views": len(result.dataset.specs)})
    return 0


def cmd_explain(args: argparse.Namespace) -> int:
    state = load_model(args.model)
    cfg, sha = load_config(args.config)
    d, _ = _datasets(cfg, n_classes=state.n_classes)
    cls = state.n_classes - 1 if args.class_index is None else args.class_index
    smap = sensitivity_map(state, d, cls)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prov = _provenance(state.meta.get("config_sha256") or sha, state.hyper.seed, class_index=cls)
    for m, name in enumerate(smap.view_names):
        write_table_csv(out / f"{name}.sensitivity.csv", smap.view_frame(m, _feature_names(state, m)), prov)
    write_table_csv(out / "relevance.csv", smap.sample_frame(), prov)
    write_table_csv(out / "views.csv", view_relevance(state), prov)
    if args.plot_data:
        for m, name in enumerate(smap.view_names):
            vp = state.preprocess.view(m)
            block = d.blocks[m]
            contrib = (np.where(block.mask, block.values, vp.mean) - vp.mean) * global_sensitivity(state, m, cls)
            contrib[~block.row_observed] = np.nan
            frame = pd.DataFrame(contrib, columns=_feature_names(state, m))
            frame.insert(0, "id", list(d.ids))
            write_table_csv(out / f"{name}.plot.csv", frame, prov)
        for view_name, path in _token_args(args.tokens):
            if view_name not in smap.view_names:
                raise DataValidationError(f"--tokens names unknown view {view_name!r}")
            m = smap.view_names.index(view_name)
            scores = token_relevance(state, m, _read_tokens(path), cls)
            frame = pd.DataFrame({"token": np.arange(len(scores)), "relevance": scores})
            write_table_csv(out / f"{view_name}.tokens.csv", frame, prov)
    log.info("explanations written", extra={"dir": str(out), "class_index": cls, "plot_data": bool(args.plot_data)})
    return 0


def cmd_cv(args: argparse.Namespace) -> int:
    cfg, sha = load_config(args.config)
    h = _hyper(cfg, args)
    regime = (args.regime or cfg.regime).lower()
    d, extra = _datasets(cfg)
    res = run_cv(d, h, regime=regime, k=args.folds, seed=h.seed, extra_unlabeled=extra)
    if args.out:
        prov = _provenance(sha, h.seed, regime=regime, folds=args.folds)
        write_table_csv(args.out, res.to_frame(), prov)
        pred_path = Path(args.out).with_suffix(".predictions.csv")
        write_table_csv(pred_path, res.predictions, prov)
    print(res.to_frame().to_string(index=False))
    print(res.summary())
    return 0


def cmd_regimes(args: argparse.Namespace) -> int:
    cfg, sha = load_config(args.config)
    h = _hyper(cfg, args)
    d, extra = _datasets(cfg)
    table = run_regime_experiment(d, h, k=args.folds, seed=h.seed, extra_unlabeled=extra)
    if args.out:
        write_table_csv(args.out, table.to_frame(), _provenance(sha, h.seed, folds=args.folds))
    print(table.formatted().to_string())
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.seed is not None:
        doc["seed"] = args.seed
    spec = SyntheticSpec.model_validate(doc)
    data = generate_synthetic(spec)
    d = inject_missingness(data.dataset, spec)
    out = Path(args.out)
    fragment = save_dataset(d, out, binary=args.binary)
    np.savez(out / "truth.npz", **data.truth.arrays())
    experiment = {**fragment, "hyper": {"seed": spec.seed}, "regime": "s"}
    (out / "config.json").write_text(json.dumps(experiment, indent=2), encoding="utf-8")
    log.info("synthetic dataset written", extra={"dir": str(out), "n": d.n, "seed": spec.seed})
    _print({"dir": str(out), "config": str(out / "config.json"), "report": validate_dataset(d).to_dict()})
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    cfg, _ = load_config(args.config)
    d, _ = _datasets(cfg)
    _print(validate_dataset(d).to_dict())
    return 0


# ---------------------------
# Parser / entry point
# ---------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bionic", description="Multi-view Bayesian latent model: fit, predict, impute, explain.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser, model: bool = False, out_required: bool = True) -> None:
        p.add_argument("--config", required=True, help="Experiment config JSON")
        p.add_argument("--out", required=out_required, default=None, help="Output path")
        if model:
            p.add_argument("--model", required=True, help="Model file written by `fit`")

    def training(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=None, help="Override hyper.seed")
        p.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=None, help="Override hyper.max_sweeps")

    p = sub.add_parser("fit", help="Fit a model and write the model file")
    common(p)
    training(p)
    p.add_argument("--regime", choices=REGIMES, type=str.lower, default=None, help="Override the config regime")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="Write id,prob_0..prob_{C-1},pred")
    common(p, model=True)
    p.add_argument("--unlabeled", action="store_true", help="Predict the config's unlabeled_views rows")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("impute", help="Fill missing entries; writes <view>.csv and <view>.var.csv")
    common(p, model=True)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("explain", help="Sensitivity and relevance tables")
    common(p, model=True)
    p.add_argument("--class", dest="class_index", type=int, default=None, help="Class index (default C-1)")
    p.add_argument("--plot-data", dest="plot_data", action="store_true", help="Also write per-feature heatmap tables")
    p.add_argument(
        "--tokens",
        action="append",
        default=[],
        metavar="VIEW=PATH",
        help="Token/patch matrix (CSV without id column, or BMV1) scored with --plot-data; repeatable",
    )
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("cv", help="Class-stratified cross-validation")
    common(p, out_required=False)
    training(p)
    p.add_argument("--regime", choices=REGIMES, type=str.lower, default=None)
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("regimes", help="Cross-validate under S, SS and TSS")
    common(p, out_required=False)
    training(p)
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    p.set_defaults(func=cmd_regimes)

    p = sub.add_parser("simulate", help="Sample a synthetic dataset (config = SyntheticSpec JSON)")
    common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--binary", action="store_true", help="Write views in the BMV1 binary format")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="Print the dataset validation report")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)

    try:
        return int(args.func(args))
    except NumericalError as e:
        log.error("numerical failure", extra={"command": args.command, "error": str(e)})
        return 2
    except (DataValidationError, ValidationError, FileNotFoundError, json.JSONDecodeError) as e:
        log.error("invalid input", extra={"command": args.command, "error": str(e)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
