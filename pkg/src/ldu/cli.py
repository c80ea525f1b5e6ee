"""``ldu`` command-line driver.

Pipeline stages, each reading and writing files under the output directory::

    gen-data        dataset.csv
    split           train.csv, test.csv
    train-ensemble  ensemble/ (member_###.txt + manifest.txt)
    featurize       preds_{train,test}.csv, features_{train,test}.csv
    sweep-ldu       curve_ldu.csv
    sweep-ld        curve_ld.csv
    sweep-dt        curve_dt.csv
    report          curve_*.svg for every curve_*.csv

Settings come from defaults, then a ``key = value`` config file
(``--config``), then ``TRIAGE_SEED`` for the seed, then ``--seed``,
``--out`` and ``--set key=value`` flags.
"""
import argparse
from dataclasses import dataclass, fields
import glob
import logging
import os
import sys

import numpy as np

from . import data_io as dio
from . import ensemble as ens
from .errors import InvalidArgumentError, ParseError, TrainingDivergedError
from .metrics import evaluate, full_threshold_grid, sweep_alpha, sweep_threshold
from .nn import TrainConfig, atomic_write_text, mlp_specs
from .report import render_curve_svg
from .rng import OFFSET_HOLDOUT, derive_seed
from .triage import decide_majority
from .uncertainty import build_defer_features

log = logging.getLogger("ldu")

COMMANDS = (
    "gen-data", "split", "train-ensemble", "featurize",
    "sweep-ldu", "sweep-ld", "sweep-dt", "report",
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "out"
    jobs: int = 1
    backend: str = ""
    # synthetic data
    n: int = 4000
    d: int = 8
    mu: float = 1.0
    confound_fraction: float = 0.1
    flip_prob: float = 0.8
    dataset: str = ""
    split_ratio: float = 0.7
    # stage one
    ensemble_k: int = 50
    ensemble_hidden: str = "16"
    ensemble_activation: str = "sigmoid"
    ensemble_epochs: int = 20
    ensemble_lr: float = 1e-3
    ensemble_optimizer: str = "adam"
    ensemble_batch: int = 32
    ensemble_weight_decay: float = 0.0
    stage2_holdout: float = 0.0
    sort_members: bool = False
    # stage two (LDU)
    ldu_hidden: str = "100,100"
    ldu_epochs: int = 40
    ldu_lr: float = 1e-3
    ldu_optimizer: str = "adam"
    ldu_batch: int = 32
    ldu_weight_decay: float = 0.0
    # LD baseline
    ld_epochs: int = 40
    ld_lr: float = 1e-3
    ld_optimizer: str = "adam"
    ld_batch: int = 32
    ld_weight_decay: float = 0.0
    ld_init: str = "fresh"
    # sweeps
    alpha_grid: str = "0.60:0.90:0.02"
    tau_grid: str = "full"
    dt_measure: str = "diagnostic"
    save_decisions: bool = False

    def path(self, *parts):
        return os.path.join(self.out_dir, *parts)

    def train_config(self, prefix):
        return TrainConfig(
            epochs=getattr(self, f"{prefix}_epochs"),
            learning_rate=getattr(self, f"{prefix}_lr"),
            batch_size=getattr(self, f"{prefix}_batch"),
            optimizer=getattr(self, f"{prefix}_optimizer"),
            weight_decay=getattr(self, f"{prefix}_weight_decay"),
            seed=self.seed,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, text):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _FIELD_TYPES[key]
    text = text.strip()
    try:
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            return float(text)
        if kind in (bool, "bool"):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {key}") from None
    return text


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        try:
            values[key.strip()] = _coerce(key.strip(), value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_run_config(config_path=None, overrides=(), seed=None, out_dir=None, environ=None):
    environ = os.environ if environ is None else environ
    values = {}
    if config_path:
        try:
            with open(config_path) as fh:
                values.update(parse_config_text(fh.read(), config_path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
    if environ.get("TRIAGE_SEED"):
        values["seed"] = _coerce("seed", environ["TRIAGE_SEED"])
    if seed is not None:
        values["seed"] = seed
    if out_dir is not None:
        values["out_dir"] = out_dir
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), value)
    return RunConfig(**values)


def parse_grid(text):
    """Comma list (``0.6,0.7``) or inclusive range ``start:stop:step``."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(p) for p in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad grid range {text!r}") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"bad grid range {text!r}")
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    try:
        grid = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None
    if not grid:
        raise ConfigError("grid must not be empty")
    return grid


def parse_hidden(text):
    text = text.strip()
    if not text:
        return []
    try:
        return [int(p) for p in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad hidden layer list {text!r}") from None


# stages


def _require(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing input {path} (run the earlier pipeline stage first)")
    return path


def _wrote(path, detail):
    print(f"wrote {path} ({detail})")


def cmd_gen_data(cfg):
    ds = dio.gen_synthetic(dio.SyntheticConfig(
        n=cfg.n, d=cfg.d, mu=cfg.mu, confound_fraction=cfg.confound_fraction,
        flip_prob=cfg.flip_prob, seed=cfg.seed,
    ))
    path = cfg.path("dataset.csv")
    dio.write_csv(ds, path)
    _wrote(path, f"{len(ds)} rows, {ds.dim} features")


def cmd_split(cfg):
    ds = dio.read_csv(_require(cfg.dataset or cfg.path("dataset.csv")), "dataset")
    train, test = dio.split_dataset(ds, cfg.split_ratio, cfg.seed)
    for name, part in (("train.csv", train), ("test.csv", test)):
        dio.write_csv(part, cfg.path(name))
        _wrote(cfg.path(name), f"{len(part)} rows")


def _stage_parts(cfg, train):
    """(ensemble training set, stage-two training set)."""
    if cfg.stage2_holdout <= 0.0:
        return train, train
    ens_part, stage2 = dio.split_dataset(train, 1.0 - cfg.stage2_holdout,
                                         derive_seed(cfg.seed, OFFSET_HOLDOUT))
    return ens_part, stage2


def _member_specs(cfg, input_dim):
    return mlp_specs(input_dim, parse_hidden(cfg.ensemble_hidden), 2, cfg.ensemble_activation)


def cmd_train_ensemble(cfg):
    train = dio.read_csv(_require(cfg.path("train.csv")), "dataset")
    ens_part, _ = _stage_parts(cfg, train)
    spec = ens.EnsembleSpec(_member_specs(cfg, train.dim), cfg.train_config("ensemble"),
                            cfg.ensemble_k, cfg.seed)
    members = ens.train_ensemble(ens_part, spec, jobs=cfg.jobs, backend=cfg.backend or None)
    directory = cfg.path("ensemble")
    ens.save_ensemble(members, cfg.seed, directory)
    _wrote(directory, f"{len(members)} members trained on {len(ens_part)} rows")


def cmd_featurize(cfg):
    members, _ = ens.load_ensemble(_require(cfg.path("ensemble")))
    train = dio.read_csv(_require(cfg.path("train.csv")), "dataset")
    test = dio.read_csv(_require(cfg.path("test.csv")), "dataset")
    _, stage2 = _stage_parts(cfg, train)
    for tag, part in (("train", stage2), ("test", test)):
        matrix = ens.predict_dataset(members, part)
        feats = build_defer_features(matrix, sort_members=cfg.sort_members)
        dio.write_csv(matrix, cfg.path(f"preds_{tag}.csv"))
        _wrote(cfg.path(f"preds_{tag}.csv"), f"{matrix.n_samples} x {matrix.n_members}")
        dio.write_csv(feats, cfg.path(f"features_{tag}.csv"))
        _wrote(cfg.path(f"features_{tag}.csv"), f"{matrix.n_samples} x {feats.rows.shape[1]}")


def _write_curve(cfg, name, rows, ids=None, decisions=None):
    path = cfg.path(f"curve_{name}.csv")
    dio.write_csv(rows, path)
    _wrote(path, f"{len(rows)} rows")
    if cfg.save_decisions and decisions is not None:
        directory = cfg.path(f"decisions_{name}")
        os.makedirs(directory, exist_ok=True)
        for row, dec in zip(rows, decisions):
            if dec is not None:
                dio.write_decisions(ids, dec, os.path.join(directory, f"param_{row.param:.6f}.csv"))
        _wrote(directory, f"{sum(d is not None for d in decisions)} decision files")


def cmd_sweep_ldu(cfg):
    train = dio.read_csv(_require(cfg.path("features_train.csv")), "features")
    test = dio.read_csv(_require(cfg.path("features_test.csv")), "features")
    rows, decisions = sweep_alpha(
        "ldu", parse_grid(cfg.alpha_grid), train, test, cfg.train_config("ldu"),
        hidden=parse_hidden(cfg.ldu_hidden), jobs=cfg.jobs, backend=cfg.backend or None,
        return_decisions=True,
    )
    _write_curve(cfg, "ldu", rows, test.ids, decisions)


def cmd_sweep_ld(cfg):
    train = dio.read_csv(_require(cfg.path("train.csv")), "dataset")
    test = dio.read_csv(_require(cfg.path("test.csv")), "dataset")
    init = None
    if cfg.ld_init == "warm":
        members, _ = ens.load_ensemble(_require(cfg.path("ensemble")))
        init = members[0]
    elif cfg.ld_init != "fresh":
        raise ConfigError(f"ld_init must be 'fresh' or 'warm', got {cfg.ld_init!r}")
    rows, decisions = sweep_alpha(
        "ld", parse_grid(cfg.alpha_grid), train, test, cfg.train_config("ld"),
        specs=_member_specs(cfg, train.dim), init=init, jobs=cfg.jobs,
        backend=cfg.backend or None, return_decisions=True,
    )
    _write_curve(cfg, "ld", rows, test.ids, decisions)


def cmd_sweep_dt(cfg):
    feats = dio.read_csv(_require(cfg.path("features_test.csv")), "features")
    if cfg.tau_grid.strip() == "full":
        grid = full_threshold_grid(feats, cfg.dt_measure)
    else:
        grid = parse_grid(cfg.tau_grid)
    rows = sweep_threshold(feats, grid, cfg.dt_measure)
    u = feats.diagnostic_entropy if cfg.dt_measure == "diagnostic" else feats.ensemble_entropy
    if not np.any(u > 0.0):
        log.warning("every %s entropy is zero: the DT ceiling is zero and DT cannot defer any sample",
                    cfg.dt_measure)
    _write_curve(cfg, "dt", rows)


def cmd_report(cfg):
    curves = sorted(glob.glob(cfg.path("curve_*.csv")))
    if not curves:
        raise FileNotFoundError(f"no curve_*.csv files in {cfg.out_dir}")
    baseline = None
    preds = cfg.path("preds_test.csv")
    if os.path.exists(preds):
        matrix = dio.read_csv(preds, "preds")
        if matrix.labels is not None:
            baseline = evaluate(decide_majority(matrix), matrix.labels).f1
    for path in curves:
        rows = dio.read_csv(path, "curve")
        name = os.path.splitext(os.path.basename(path))[0]
        strategy = name.split("_", 1)[1] if "_" in name else name
        x_label = "entropy threshold" if strategy == "dt" else "defer-loss weight alpha"
        svg = render_curve_svg(rows, title=f"{strategy.upper()}: F1 and defer rate",
                               x_label=x_label, baseline_f1=baseline)
        out = os.path.splitext(path)[0] + ".svg"
        atomic_write_text(out, svg)
        _wrote(out, f"{len(rows)} points")


HANDLERS = {
    "gen-data": cmd_gen_data,
    "split": cmd_split,
    "train-ensemble": cmd_train_ensemble,
    "featurize": cmd_featurize,
    "sweep-ldu": cmd_sweep_ldu,
    "sweep-ld": cmd_sweep_ld,
    "sweep-dt": cmd_sweep_dt,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="ldu", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--out", help="output directory (config key out_dir)")
    parser.add_argument("--seed", type=int, help="master seed (overrides TRIAGE_SEED)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value; repeatable")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run_command(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = load_run_config(args.config, args.set, args.seed, args.out)
        os.makedirs(cfg.out_dir, exist_ok=True)
        HANDLERS[args.command](cfg)
    except (ConfigError, InvalidArgumentError, ParseError, TrainingDivergedError,
            FileNotFoundError, OSError) as exc:
        print(f"ldu {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
