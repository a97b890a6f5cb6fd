"""Command-line entry point: gen, fit, eval, bench and plotdata."""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import experiment as ex
from .data import ingest_csv, write_dataset
from .errors import InputError, NumericalError
from .metrics import fscore, model_mse
from .recovery import KernelMixtureModel, load_model, map_assign, save_model
from .synth import SyntheticSpec, get_preset, sample_dataset


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _spec_from_json(d):
    if "preset" in d:
        return get_preset(d["preset"], m=d.get("m"), seed=d.get("seed"))
    return SyntheticSpec.from_dict(d)


def _print(obj):
    print(json.dumps(ex.round_sig(obj), indent=2, sort_keys=True))


def cmd_gen(args):
    spec = _spec_from_json(_read_json(args.config))
    if args.m is not None:
        spec.m = args.m
    if args.seed is not None:
        spec.seed = args.seed
    data = sample_dataset(spec)
    write_dataset(data, args.out)
    root, _ = os.path.splitext(args.out)
    with open(root + ".spec.json", "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
    print(f"wrote {data.m} rows to {args.out}")


def cmd_fit(args):
    cfg = ex.load_config(args.config)
    seed = args.seed if args.seed is not None else (cfg.seeds[0] if cfg.seeds else 0)
    spec = cfg.spec()
    if args.data:
        data = ingest_csv(args.data, cfg.data.get("view_split"))
    elif spec is not None:
        m = cfg.sample_sizes[0] if cfg.sample_sizes else None
        data = ex._load_data(cfg, m, seed, spec, None)
    else:
        data = ingest_csv(cfg.data["csv"], cfg.data.get("view_split"))
    name = args.estimator or cfg.estimators[0]
    model, bws = ex.fit_estimator(cfg, name, data, cfg.n_components(), seed, spec)
    if isinstance(model, KernelMixtureModel):
        model.diagnostics["bandwidths"] = bws
    save_model(model, args.out, checksum=data.checksum())
    _print({"estimator": name, "m": data.m, "weights": model.weights, "bandwidths": bws})


def cmd_eval(args):
    model = load_model(args.estimate)
    data = ingest_csv(args.data)
    out = {"m": data.m, "k": model.k}
    with open(args.estimate) as fh:
        stored = json.load(fh).get("train_checksum")
    out["same_as_training"] = stored == data.checksum()
    out["loglik"] = float(np.mean(ex.cv.heldout_scores(model, data.views)))
    if data.labels is not None:
        out["fscore"] = fscore(data.labels, map_assign(model, data.views), model.k)
    spec = None
    if args.config:
        d = _read_json(args.config)
        spec = ex.ExperimentConfig.from_dict(d).spec() if "data" in d else _spec_from_json(d)
    if spec is not None:
        out["mse"], out["mse_per_view"] = model_mse(spec, model, data)
    _print(out)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(ex.round_sig(out), fh, indent=2, sort_keys=True)


def cmd_bench(args):
    cfg = ex.load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    out = args.out or cfg.output
    records = ex.run_experiment(cfg, out, threads=args.threads)
    bad = sum(r.status != "ok" for r in records)
    print(f"{len(records)} records ({bad} failed) in {out}")
    with open(os.path.join(out, "summary.csv")) as fh:
        sys.stdout.write(fh.read())


def cmd_plotdata(args):
    records = ex.read_records(args.records)
    ex.write_plot_data(records, args.out)
    header, rows = ex.plot_table(records)
    print(",".join(header))
    for row in rows:
        print(",".join(str(c) for c in row))


def build_parser():
    p = argparse.ArgumentParser(prog="kspectral", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic dataset CSV from a spec JSON")
    g.add_argument("--config", required=True, help="synthetic spec JSON or {\"preset\": name}")
    g.add_argument("--seed", type=int)
    g.add_argument("--m", type=int, help="override the sample count")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", help="fit one estimator and save it as JSON")
    f.add_argument("--config", required=True, help="experiment config JSON")
    f.add_argument("--data", help="CSV dataset (defaults to the config's data source)")
    f.add_argument("--estimator", choices=ex.ESTIMATORS)
    f.add_argument("--seed", type=int)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="score a saved estimate on a dataset")
    e.add_argument("--estimate", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--config", help="synthetic spec or experiment config, for the density MSE")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="run a full experiment config")
    b.add_argument("--config", required=True)
    b.add_argument("--seed", type=int, help="run this single seed instead of the config's list")
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--out", help="output directory (defaults to the config's output)")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("plotdata", help="per-size table of mean MSE per estimator")
    d.add_argument("records", help="records.jsonl written by bench")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InputError, NumericalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
