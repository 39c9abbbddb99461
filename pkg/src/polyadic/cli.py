"""
Command-line entry point.

    polyadic train CONFIG            train, save the best model, report accuracy
    polyadic eval MODEL DATA.csv     accuracy and confusion matrix of a saved model
    polyadic simulate CIRCUIT        outcome distribution (or shot counts) as CSV
    polyadic optimize CIRCUIT        peephole optimization plus JSON report
    polyadic translate CIRCUIT       rewrite for a cnot or zz native gate set
    polyadic gen-data GENERATOR      write a generated dataset as CSV
    polyadic boundary MODEL          predicted class over a 2-D grid

Outputs go to ``-o`` when given, otherwise into $POLYADIC_OUTPUT_DIR (or the
working directory). Files are written to a temporary name and renamed, so a
failed command leaves nothing half-written.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .circuit import bind, from_text, pulse_count, to_text
from .config import ConfigError, load_config, prepare
from .data import gen_gaussian_xor, gen_synthetic4, load_csv, save_csv
from .encoding import EncoderStats, encode, fit
from .model import EXACT, ModelSpec, Sampled
from .passes import optimize
from .simulator import bitstring, probabilities, sample
from .train import best_report, evaluate, train_restarts
from .translate import translate

log = logging.getLogger("polyadic")

OUTPUT_ENV = "POLYADIC_OUTPUT_DIR"


class CLIError(Exception):
    pass


def output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or ".")


def out_path(explicit, default_name: str) -> Path:
    path = Path(explicit) if explicit else output_dir() / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_circuit(path):
    try:
        return from_text(Path(path).read_text())
    except OSError as e:
        raise CLIError(f"cannot read circuit: {e}") from None
    except ValueError as e:
        raise CLIError(f"{path}: {e}") from None


def read_model(path) -> ModelSpec:
    try:
        return ModelSpec.from_json(Path(path).read_text())
    except OSError as e:
        raise CLIError(f"cannot read model: {e}") from None
    except (ValueError, KeyError) as e:
        raise CLIError(f"{path}: not a valid model file ({e})") from None


def parse_floats(text):
    if text is None or text == "":
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise CLIError(f"expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------------------
# train / eval
# ---------------------------------------------------------------------------

def _eval_modes(cfg):
    modes = [("exact", EXACT)]
    if cfg.eval_shots:
        modes += [(f"{cfg.eval_shots} shots, seed {s}", Sampled(cfg.eval_shots, s))
                  for s in cfg.eval_seeds]
    return modes


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.restarts is not None:
        if args.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {args.restarts}")
        cfg.restarts = args.restarts
    if args.seed is not None:
        cfg.seed = args.seed
    train_set, test_set = prepare(cfg, args.data)
    encoder = cfg.encoder
    if encoder is None:
        stats, omegas = None, train_set.features
    else:
        stats = fit(train_set.features)
        omegas = encode(train_set.features, stats, encoder)
    print(f"{cfg.name}: {len(train_set)} training / {len(test_set)} test samples, "
          f"{cfg.restarts} restarts ({cfg.mode}, {cfg.optimizer})")
    reports = train_restarts(cfg.circuit, cfg.class_map, omegas, train_set.labels,
                             restarts=cfg.restarts, seed=cfg.seed, n_jobs=args.jobs,
                             mode=cfg.mode, optimizer=cfg.optimizer, schedule=cfg.schedule,
                             max_iters=cfg.max_iters, tol=cfg.tol)
    best = best_report(reports)

    def spec_for(report):
        kwargs = {} if encoder is None else {"encoder_config": encoder}
        return ModelSpec(cfg.circuit, cfg.class_map, stats, theta=report.best_theta, **kwargs)

    test_acc = [evaluate(spec_for(r), test_set.features, test_set.labels)[0] for r in reports]
    spec = spec_for(best)
    acc, cm = evaluate(spec, test_set.features, test_set.labels)
    train_acc, _ = evaluate(spec, train_set.features, train_set.labels)
    results = {"train_accuracy": train_acc, "test_accuracy": acc,
               "median_test_accuracy": float(np.median(test_acc)),
               "best_loss": best.best_loss, "restart_losses": [r.best_loss for r in reports],
               "restart_test_accuracies": test_acc, "confusion_matrix": cm.counts.tolist()}
    for label, mode in _eval_modes(cfg)[1:]:
        results.setdefault("sampled_test_accuracy", {})[label] = evaluate(
            spec, test_set.features, test_set.labels, mode)[0]
    spec.summary = {"config": cfg.name, "seed": best.seed, "iterations": best.iterations,
                    "status": best.status, "best_loss": best.best_loss,
                    "train_accuracy": train_acc, "test_accuracy": acc}

    prefix = args.output or str(output_dir() / cfg.name)
    model_path = Path(f"{prefix}.model.json")
    model_path.parent.mkdir(parents=True, exist_ok=True)
    trace_rows = [(i, r.seed, k, repr(loss), r.shots_trace[k] if k < len(r.shots_trace) else "")
                  for i, r in enumerate(reports) for k, loss in enumerate(r.loss_trace)]
    write_atomic(Path(f"{prefix}.trace.csv"),
                 csv_text(("restart", "seed", "iteration", "loss", "shots"), trace_rows))
    write_atomic(Path(f"{prefix}.report.json"), json.dumps(results, indent=2))
    write_atomic(model_path, spec.to_json())

    print(f"best training loss {best.best_loss:.6f} (restart seed {best.seed}, {best.status})")
    print(f"train accuracy {train_acc:.4f}")
    print(f"test accuracy  {acc:.4f} (best model), median over restarts {np.median(test_acc):.4f}")
    for label, value in results.get("sampled_test_accuracy", {}).items():
        print(f"test accuracy  {value:.4f} ({label})")
    print("confusion matrix (rows = actual, columns = predicted):")
    print(cm)
    print(f"model written to {model_path}")
    return 0


def cmd_eval(args) -> int:
    spec = read_model(args.model)
    try:
        ds = load_csv(args.data)
    except OSError as e:
        raise CLIError(f"cannot read data: {e}") from None
    labels = spec.class_map.labels
    unknown = [n for n in ds.class_names if str(n) not in labels]
    if unknown:
        raise CLIError(f"data has classes {unknown} unknown to the model (model classes: {list(labels)})")
    y = np.array([labels.index(str(ds.class_names[k])) for k in ds.labels])
    mode = EXACT if args.shots is None else Sampled(args.shots, args.seed)
    acc, cm = evaluate(spec, ds.features, y, mode)
    print(f"accuracy {acc:.4f} on {len(y)} samples ({'exact' if mode == EXACT else f'{args.shots} shots'})")
    print("confusion matrix (rows = actual, columns = predicted):")
    print(cm)
    return 0


# ---------------------------------------------------------------------------
# circuits
# ---------------------------------------------------------------------------

def _bound(circuit, args):
    if circuit.is_bound:
        return circuit
    try:
        return bind(circuit, parse_floats(args.inputs), parse_floats(args.params))
    except ValueError as e:
        raise CLIError(f"{e} (pass --inputs and --params to bind the circuit)") from None


def cmd_simulate(args) -> int:
    circuit = _bound(read_circuit(args.circuit), args)
    n = circuit.width
    if args.shots:
        counts = sample(circuit, args.shots, args.seed)
        rows = [(bitstring(i, n), counts[bitstring(i, n)]) for i in range(2 ** n)]
        text = csv_text(("bitstring", "count"), rows)
    else:
        probs = probabilities(circuit)[0]
        text = csv_text(("bitstring", "probability"), [(bitstring(i, n), repr(float(p)))
                                                       for i, p in enumerate(probs)])
    if args.output:
        write_atomic(out_path(args.output, ""), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_optimize(args) -> int:
    circuit = read_circuit(args.circuit)
    try:
        result, report = optimize(circuit)
    except ValueError as e:
        raise CLIError(str(e)) from None
    stem = Path(args.circuit).stem
    path = out_path(args.output, f"{stem}.opt.txt")
    report_path = Path(args.report) if args.report else path.with_name(path.name + ".json")
    write_atomic(report_path, json.dumps(report.to_dict(), indent=2))
    write_atomic(path, to_text(result))
    r = report.to_dict()
    print(f"pulses {r['pulses_before']} -> {r['pulses_after']}; circuit written to {path}")
    return 0


def cmd_translate(args) -> int:
    circuit = _bound(read_circuit(args.circuit), args)
    try:
        result = translate(circuit, args.target, normalize=args.normalize)
    except ValueError as e:
        raise CLIError(str(e)) from None
    stem = Path(args.circuit).stem
    path = out_path(args.output, f"{stem}.{args.target}.txt")
    before, after = pulse_count(circuit), pulse_count(result)
    report = {"target": args.target,
              "pulses_before": [before.one_qubit_pulses, before.two_qubit_pulses],
              "pulses_after": [after.one_qubit_pulses, after.two_qubit_pulses]}
    write_atomic(path.with_name(path.name + ".json"), json.dumps(report, indent=2))
    write_atomic(path, to_text(result))
    print(f"translated to {args.target}: pulses {report['pulses_after']}; written to {path}")
    return 0


# ---------------------------------------------------------------------------
# data and boundaries
# ---------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    if args.generator == "xor":
        ds = gen_gaussian_xor(args.per_center, args.sigma, args.scale, args.seed)
    else:
        ds = gen_synthetic4(args.n, args.seed, args.flip)
    path = out_path(args.output, f"{args.generator}.csv")
    save_csv(ds, path)
    print(f"{len(ds)} samples ({ds.class_counts()}) written to {path}")
    return 0


def default_extent(spec: ModelSpec, axis: int) -> tuple[float, float]:
    stats: EncoderStats | None = spec.encoder_stats
    if stats is None:
        return -np.pi, np.pi
    half = spec.encoder_config.q * stats.std[axis]
    return stats.mean[axis] - half, stats.mean[axis] + half


def cmd_boundary(args) -> int:
    spec = read_model(args.model)
    d = spec.circuit.num_inputs
    if d != 2:
        raise CLIError(f"decision boundaries need a model with 2 features, this one has {d}")
    if args.grid < 1:
        raise CLIError("grid size must be >= 1")
    x_lo, x_hi = args.xlim or default_extent(spec, 0)
    y_lo, y_hi = args.ylim or default_extent(spec, 1)
    xs = np.linspace(x_lo, x_hi, args.grid)
    ys = np.linspace(y_lo, y_hi, args.grid)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    labels = spec.predict(points)
    rows = [(repr(float(a)), repr(float(b)), lab) for (a, b), lab in zip(points, labels)]
    path = out_path(args.output, "boundary.csv")
    write_atomic(path, csv_text(("x0", "x1", "predicted"), rows))
    print(f"{len(rows)} grid points written to {path}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyadic", description="Polyadic variational quantum classifier")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train from an experiment config")
    t.add_argument("config", help="config file or bundled name (iris, xor, skin, synthetic, ...)")
    t.add_argument("-o", "--output", help="output prefix (default: $POLYADIC_OUTPUT_DIR/<name>)")
    t.add_argument("--data", help="override the dataset file of a csv-sourced config")
    t.add_argument("--restarts", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--jobs", type=int, default=1, help="parallel restarts")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a saved model on a CSV file")
    e.add_argument("model")
    e.add_argument("data")
    e.add_argument("--shots", type=int)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("simulate", help="outcome distribution of a circuit")
    s.add_argument("circuit")
    s.add_argument("--inputs", help="comma-separated input angles")
    s.add_argument("--params", help="comma-separated model parameters")
    s.add_argument("--shots", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("optimize", help="peephole-optimize a native circuit")
    o.add_argument("circuit")
    o.add_argument("-o", "--output")
    o.add_argument("--report", help="JSON report path (default: <output>.json)")
    o.set_defaults(func=cmd_optimize)

    r = sub.add_parser("translate", help="rewrite a bound circuit for another gate set")
    r.add_argument("circuit")
    r.add_argument("--target", choices=("cz", "cnot", "zz"), required=True)
    r.add_argument("--inputs")
    r.add_argument("--params")
    r.add_argument("--normalize", action="store_true", help="optimize before translating")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_translate)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset")
    g.add_argument("generator", choices=("xor", "synthetic4"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--per-center", type=int, default=20)
    g.add_argument("--sigma", type=float)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--n", type=int, default=5000)
    g.add_argument("--flip", type=float, default=0.01)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_data)

    b = sub.add_parser("boundary", help="predicted class over a grid (2-feature models)")
    b.add_argument("model")
    b.add_argument("--grid", type=int, default=200)
    b.add_argument("--xlim", type=float, nargs=2)
    b.add_argument("--ylim", type=float, nargs=2)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_boundary)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CLIError, ConfigError, ValueError, OSError) as e:
        print(f"polyadic {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
