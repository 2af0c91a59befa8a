"""Command-line front end: ``mldtco {gen,train,eval,sim,bench}``.

Settings resolve as defaults < ``--config`` file (top level, then the table
named after the subcommand) < command-line flags. Data goes to files under
``--out``; diagnostics go to stderr. Exit status is 0 on success, 2 on usage
errors and 1 on any other failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import dataset as D
from . import mlp
from .bench import figures as F
from .bench.circuits import NandTiming
from .bench.studies import device_errors, error_summary, random_biases
from .refdev import make_reference
from .simcore import parse_netlist, run_netlist
from .surrogate import load_surrogate, train_net

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("mldtco")

DEVICES = {"nfinfet": "nfin_ref", "ntfet": "ntfet_ref"}
V_MAX = {"nfinfet": 0.8, "ntfet": 0.9}
SWEEP_SPECS = [(2, n) for n in (8, 16, 32, 64)] + [(k, 32) for k in (1, 3, 4)]

# config keys accepted per subcommand (beyond those shared by all)
_COMMON = {"seed", "out"}
_KEYS = {
    "gen": {"device", "step", "v_max"},
    "train": {"layers", "neurons", "epochs", "lr", "lr_final", "batch", "target_loss", "sweep", "jobs"},
    "eval": {"device", "n_test"},
    "sim": set(),
    "bench": {"models", "n_test", "jobs", "epochs", "lr", "lr_final", "batch", "layers", "neurons", "sizes",
              "learning_test", "region_test", "vdd_finfet", "vdd_tfet", "dc_step"} | {f.name for f in fields(NandTiming)},
}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mldtco", description="Device surrogate training and circuit benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="output directory (default: current directory)")
        sp.add_argument("--seed", type=int, help="random seed (default 42)")
        sp.add_argument("--config", help="TOML file with default settings")

    def training(sp):
        sp.add_argument("--layers", type=int, help="hidden layers (default 2)")
        sp.add_argument("--neurons", type=int, help="neurons per hidden layer (default 32)")
        sp.add_argument("--epochs", type=int, help="maximum epochs")
        sp.add_argument("--lr", type=float, help="initial Adam learning rate")
        sp.add_argument("--batch", type=int, help="mini-batch size")

    g = sub.add_parser("gen", help="generate training datasets")
    g.add_argument("--device", choices=sorted(DEVICES), help="device kind (required)")
    g.add_argument("--step", type=float, help="grid step in volts (default 0.05)")
    common(g)

    t = sub.add_parser("train", help="train a surrogate net on a dataset CSV")
    t.add_argument("dataset", help="dataset CSV written by gen")
    training(t)
    t.add_argument("--sweep", action="store_true", help="also run the layer/neuron sweep")
    t.add_argument("--jobs", type=int, help="parallel sweep entries")
    common(t)

    e = sub.add_parser("eval", help="score a surrogate on random biases")
    e.add_argument("models", nargs="+", help="model JSON file(s), or 'ref' for the reference itself")
    e.add_argument("--device", choices=sorted(DEVICES), help="reference device (default: from the model)")
    e.add_argument("--n-test", type=int, dest="n_test", help="number of random biases (default 50000)")
    common(e)

    s = sub.add_parser("sim", help="run every analysis in a netlist")
    s.add_argument("netlist")
    common(s)

    b = sub.add_parser("bench", help="run figure-analog benchmarks")
    b.add_argument("figure", choices=list(F.FIGURES) + ["all"])
    b.add_argument("--models", help="directory with trained models (default: --out)")
    b.add_argument("--n-test", type=int, dest="n_test", help="random biases for fig5")
    b.add_argument("--jobs", type=int, help="parallel figures")
    training(b)
    common(b)
    return p


def _load_config(path, command: str) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    allowed = _COMMON | _KEYS[command]
    known = _COMMON.union(*_KEYS.values())
    top = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    table = raw.get(command, {})
    tables = {k for k, v in raw.items() if isinstance(v, dict)}
    # top-level keys may belong to another subcommand; table keys must fit this one
    unknown = sorted((set(top) - known) | (set(table) - allowed) | (tables - set(_KEYS)))
    if unknown:
        raise UsageError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    conf = {k: v for k, v in top.items() if k in allowed}
    conf.update(table)
    return conf


def _settings(args) -> dict:
    conf = _load_config(args.config, args.command)
    for k, v in vars(args).items():
        if v is not None and v is not False and k not in ("config", "command", "verbose"):
            conf[k] = v
    conf.setdefault("seed", 42)
    conf.setdefault("out", ".")
    return conf


def _train_config(conf: dict) -> mlp.TrainConfig:
    base = mlp.TrainConfig()
    kw = {"seed": conf["seed"]}
    for key, name in (("epochs", "max_epochs"), ("lr", "learning_rate"), ("lr_final", "lr_final"),
                      ("batch", "batch_size"), ("target_loss", "target_loss")):
        if key in conf:
            kw[name] = conf[key]
    return replace(base, **kw)


def _spec(conf: dict) -> mlp.MLPSpec:
    return mlp.MLPSpec.uniform(int(conf.get("layers", 2)), int(conf.get("neurons", 32)))


def _outdir(conf: dict) -> Path:
    out = Path(conf["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(conf: dict) -> None:
    device = conf.get("device")
    if device not in DEVICES:
        raise UsageError(f"--device must be one of {', '.join(sorted(DEVICES))}")
    out = _outdir(conf)
    v_max = float(conf.get("v_max", V_MAX[device]))
    grid = D.generate_grid(make_reference(DEVICES[device]), 0.0, v_max, float(conf.get("step", 0.05)))
    if device == "nfinfet":
        parts = {"nfinfet": D.canonicalize_symmetric(grid)}
    else:
        fwd, rev = D.split_regions_tfet(grid)
        parts = {"ntfet_fwd": fwd, "ntfet_rev": rev}
    for stem, ds in parts.items():
        D.save_csv(ds, out / f"{stem}.csv")
        log.info("wrote %s (%d rows)", out / f"{stem}.csv", len(ds))


def cmd_train(conf: dict) -> None:
    ds = D.load_csv(conf["dataset"])
    if len(ds) == 0:
        raise ValueError(f"dataset {conf['dataset']} is empty")
    out = _outdir(conf)
    cfg = _train_config(conf)
    stem = Path(conf["dataset"]).stem
    net, hist = train_net(ds, _spec(conf), cfg)
    net.save(out / f"{stem}.json")
    F.write_csv(out / f"{stem}_loss.csv", {"epoch": list(range(1, len(hist) + 1)), "loss": hist})
    log.info("trained %s: final standardized loss %.3e after %d epochs", stem, hist[-1], len(hist))
    if conf.get("sweep"):
        specs = [mlp.MLPSpec.uniform(k, n) for k, n in SWEEP_SPECS]
        rows = mlp.hyperparam_sweep(ds.inputs, ds.targets, specs, cfg, jobs=int(conf.get("jobs", 1)))
        F.write_csv(out / f"{stem}_sweep.csv", {k: [r[k] for r in rows] for k in ("layers", "neurons", "train_mse", "heldout_mse")})


def _device_of(models) -> str:
    tags = {m.region_tag for m in models.nets}
    return "ntfet" if tags & {"tfet_fwd", "tfet_rev"} else "nfinfet"


def cmd_eval(conf: dict) -> None:
    paths = conf["models"]
    if paths == ["ref"]:
        if "device" not in conf:
            raise UsageError("eval of 'ref' needs --device")
        device = conf["device"]
        model = make_reference(DEVICES[device])
    else:
        for p in paths:
            if not Path(p).exists():
                raise FileNotFoundError(f"model file {p} not found")
        model = load_surrogate(paths)
        device = conf.get("device") or _device_of(model)
    out = _outdir(conf)
    bias = random_biases(0.0, V_MAX[device], int(conf.get("n_test", 50000)), conf["seed"])
    table = device_errors(model, make_reference(DEVICES[device]), bias)
    F.write_csv(out / f"eval_{device}_scatter.csv", table)
    summary = error_summary(table)
    F.merge_metrics(out, {f"eval_{device}": summary})
    log.info("eval %s: %s", device, summary)


def cmd_sim(conf: dict) -> None:
    path = Path(conf["netlist"])
    nl = parse_netlist(path.read_text())
    if not nl.analyses:
        raise ValueError(f"{path} has no analysis statement")
    out = _outdir(conf)
    for k, res in enumerate(run_netlist(nl, base_dir=path.parent)):
        dest = out / f"{path.stem}_{k}_{res.kind}.csv"
        res.to_csv(dest)
        log.info("wrote %s", dest)


def cmd_bench(conf: dict) -> None:
    out = _outdir(conf)
    models = Path(conf.get("models", out))
    kw = {"seed": conf["seed"], "train": _train_config(conf), "spec": _spec(conf)}
    for key in ("n_test", "learning_test", "region_test", "vdd_finfet", "vdd_tfet", "dc_step"):
        if key in conf:
            kw[key] = conf[key]
    if "sizes" in conf:
        kw["learning_sizes"] = tuple(int(s) for s in conf["sizes"])
    timing = {f.name: float(conf[f.name]) for f in fields(NandTiming) if f.name in conf}
    if timing:
        kw["timing"] = NandTiming(**timing)
    cfg = F.BenchConfig(**kw)
    names = list(F.FIGURES) if conf["figure"] == "all" else [conf["figure"]]
    F.run_figures(names, models, out, cfg, jobs=int(conf.get("jobs", 1)))


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "sim": cmd_sim, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](_settings(args))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mldtco {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # any failure becomes a one-line diagnostic and exit 1
        log.debug("traceback", exc_info=True)
        print(f"mldtco {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
