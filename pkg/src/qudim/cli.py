"""Command-line surface: generate | train | estimate | sweep | baseline.

Every run resolves its parameters from built-in defaults, then an optional
``key=value`` config file (unknown keys rejected), then command-line flags
(flags win), and writes the fully resolved configuration next to its outputs.
Identical resolved configurations produce identical output files.

Numeric imports happen inside the command implementations so that ``--threads``
can cap the BLAS thread pools through environment variables before any
numerical library loads. Results do not depend on the thread count.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

GENERATORS = ("sphere", "circle", "swissroll", "hypercube")
SWEEP_METHODS = ("qmetric", "twonn", "mle")
_THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


class CliError(Exception):
    """User-facing command failure; message printed to stderr, exit code 1."""


# ---------------------------------------------------------------------------
# Option schemas: name -> (type caster, default). Positionals are separate.
# ---------------------------------------------------------------------------

def _str_or_float(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def _str_or_int(text: str):
    try:
        return int(text)
    except ValueError:
        return text


_COMMON = {
    "seed": (int, 0),
    "out": (str, "."),
    "threads": (int, None),
}

_TRAIN_OPTS = {
    "n": (int, None),  # required
    "w": (float, 0.0),
    "lr": (float, 1e-2),
    "epochs": (int, 300),
    "batch_size": (_str_or_int, "auto"),
    "optimizer": (str, "adaptive_moments"),
    "init_scale": (_str_or_float, "auto"),
}

SCHEMAS: dict[str, dict] = {
    "generate": {
        **_COMMON,
        "t": (int, 2500),
        "noise": (float, 0.0),
        "ambient_pad": (int, 0),
        "intrinsic_dim": (int, 17),
        "ambient_dim": (int, 18),
    },
    "train": {**_COMMON, **_TRAIN_OPTS},
    "estimate": {
        **_COMMON,
        "method": (str, "ratio"),
        "aggregation": (str, "mode"),
        "ratio_floor": (float, 1e-12),
        "aspect": (float, 1.0),
        "degeneracy_floor": (float, 1e-8),
    },
    "sweep": {
        **_COMMON,
        **_TRAIN_OPTS,
        "data": (str, None),
        "noise_grid": (str, "0:0.2:0.05"),
        "methods": (str, "qmetric,twonn,mle"),
        "noise_model": (str, None),  # additive | feature_scaled
        "t": (int, 500),
        "method": (str, "ratio"),
        "aggregation": (str, "mode"),
        "mle_k": (int, 10),
        "twonn_discard": (float, 0.1),
    },
    "baseline": {
        **_COMMON,
        "method": (str, "twonn"),
        "k": (int, 10),
        "discard_fraction": (float, 0.1),
    },
}

_POSITIONALS = {
    "generate": [("manifold", "manifold name: " + " | ".join(GENERATORS))],
    "train": [("dataset", "path to a dataset table")],
    "estimate": [("model", "path to a model container"),
                 ("dataset", "path to a dataset table")],
    "sweep": [("manifold", "manifold name (omit when using --data)")],
    "baseline": [("dataset", "path to a dataset table")],
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qudim",
        description="Matrix-configuration models and intrinsic dimension "
                    "estimation from quantum-metric spectra.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in SCHEMAS.items():
        p = sub.add_parser(command)
        for name, help_text in _POSITIONALS[command]:
            nargs = "?" if command == "sweep" else None
            p.add_argument(name, nargs=nargs, help=help_text)
        p.add_argument("--config", default=None,
                       help="key=value file overriding defaults; flags win")
        for name, (caster, _) in schema.items():
            flag = "--" + name.replace("_", "-")
            p.add_argument(flag, dest=name, type=caster, default=None)
    return parser


def _read_config_file(path: str, schema: dict) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in schema:
            raise CliError(f"{path}:{lineno}: unknown key {key!r}")
        caster = schema[key][0]
        try:
            values[key] = caster(raw.strip())
        except ValueError:
            raise CliError(f"{path}:{lineno}: bad value for {key!r}: "
                           f"{raw.strip()!r}") from None
    return values


def _resolve(args: argparse.Namespace, command: str) -> dict:
    schema = SCHEMAS[command]
    resolved = {name: default for name, (_, default) in schema.items()}
    if args.config:
        resolved.update(_read_config_file(args.config, schema))
    for name in schema:
        value = getattr(args, name, None)
        if value is not None:
            resolved[name] = value
    for name, _ in _POSITIONALS[command]:
        resolved[name] = getattr(args, name, None)
    return resolved


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def _write_key_values(path, mapping: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, value in mapping.items():
            fh.write(f"{key}={_fmt(value)}\n")


def read_key_values(path) -> dict:
    """Parse a key=value report back into a string dict (lossless floats)."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            out[key] = value
    return out


def _prepare_out(resolved: dict, command: str) -> Path:
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_key_values(out / f"{command}_config.txt", resolved)
    return out


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------

def _generate_dataset(resolved: dict):
    from . import datasets

    name = resolved["manifold"]
    t, noise, seed = resolved["t"], resolved["noise"], resolved["seed"]
    if name == "sphere":
        return datasets.gen_sphere(t, ambient_pad=resolved.get("ambient_pad", 0),
                                   noise=noise, seed=seed)
    if name == "circle":
        return datasets.gen_circle(t, noise=noise, seed=seed)
    if name == "swissroll":
        return datasets.gen_swiss_roll(t, noise=noise, seed=seed)
    if name == "hypercube":
        return datasets.gen_hypercube(t, noise=noise, seed=seed,
                                      d=resolved.get("intrinsic_dim", 17),
                                      ambient_dim=resolved.get("ambient_dim", 18))
    raise CliError(f"unknown generator {name!r}; valid generators: "
                   + ", ".join(GENERATORS))


def _cmd_generate(resolved: dict) -> int:
    from . import datasets

    if resolved["manifold"] not in GENERATORS:
        raise CliError(f"unknown generator {resolved['manifold']!r}; "
                       "valid generators: " + ", ".join(GENERATORS))
    dataset = _generate_dataset(resolved)
    out = _prepare_out(resolved, "generate")
    table = out / f"{dataset.name}.csv"
    datasets.save_table(dataset, table)
    print(f"wrote {table} ({dataset.n_points} x {dataset.n_features}, "
          f"true_dim={dataset.true_dim})")
    return 0


def _load_dataset(path: str):
    from . import datasets

    if not Path(path).exists():
        raise CliError(f"dataset file not found: {path}")
    return datasets.load_table(path)


def _cmd_train(resolved: dict) -> int:
    from . import model as model_mod
    from . import training
    from .errors import TrainingDiverged

    if resolved["n"] is None:
        raise CliError("--n (Hilbert dimension) is required")
    dataset = _load_dataset(resolved["dataset"])
    cfg = training.TrainConfig(
        hilbert_dim=resolved["n"],
        fluctuation_weight=resolved["w"],
        learning_rate=resolved["lr"],
        epochs=resolved["epochs"],
        batch_size=resolved["batch_size"],
        seed=resolved["seed"],
        optimizer=resolved["optimizer"],
        init_scale=resolved["init_scale"],
    )
    out = _prepare_out(resolved, "train")
    try:
        trained, report = training.train(dataset, cfg)
    except TrainingDiverged as exc:
        raise CliError(f"training diverged: {exc}") from exc
    model_mod.save_config(trained, out / "model.npz", seed=cfg.seed,
                          loss_weight=cfg.fluctuation_weight,
                          extra={"epochs": cfg.epochs,
                                 "optimizer": cfg.optimizer,
                                 "learning_rate": cfg.learning_rate})
    _write_key_values(out / "train_report.txt", {
        "epochs": len(report.loss_history),
        "final_loss": report.final_loss,
        "final_mean_energy": report.final_mean_energy,
        "degenerate_ground_count": report.degenerate_ground_count,
    })
    with open(out / "loss_history.csv", "w", newline="\n") as fh:
        fh.write("epoch,loss\n")
        for i, value in enumerate(report.loss_history):
            fh.write(f"{i},{float(value)!r}\n")
    print(f"final_loss={report.final_loss:.6g} "
          f"mean_energy={report.final_mean_energy:.6g} "
          f"wall_time={report.wall_time_seconds:.1f}s")
    return 0


def _cmd_estimate(resolved: dict) -> int:
    from . import estimator, geometry, model as model_mod
    from .errors import EstimationFailed

    model_path = Path(resolved["model"])
    if not model_path.exists():
        raise CliError(f"model file not found: {model_path}")
    config, meta = model_mod.load_config(model_path)
    dataset = _load_dataset(resolved["dataset"])
    if dataset.n_features != config.feature_dim:
        raise CliError(
            f"dimension mismatch: dataset has {dataset.n_features} features, "
            f"model has {config.feature_dim}"
        )
    if resolved["method"] not in estimator.METHODS:
        raise CliError(f"unknown method {resolved['method']!r}")
    if resolved["aggregation"] not in estimator.AGGREGATIONS:
        raise CliError(f"unknown aggregation {resolved['aggregation']!r}")
    out = _prepare_out(resolved, "estimate")
    try:
        report = estimator.estimate_dimensions(
            config, dataset, resolved["method"],
            ratio_floor=resolved["ratio_floor"],
            aspect=resolved["aspect"],
            degeneracy_floor=resolved["degeneracy_floor"],
        )
    except EstimationFailed as exc:
        raise CliError(str(exc)) from exc

    extra = {"aggregation": resolved["aggregation"],
             "headline": _headline(report, resolved["aggregation"])}
    if resolved["method"] == "rmt":
        import numpy as np

        thresholds = [e.threshold for e in report.entries if not e.skipped]
        scales = [e.noise_scale for e in report.entries if not e.skipped]
        extra["median_threshold"] = float(np.median(thresholds))
        extra["median_noise_scale"] = float(np.median(scales))
    estimator.save_dimension_report(report, out / "estimate_report.txt",
                                    out / "local_dims.csv", extra)
    keep = [e.source_index for e in report.entries if not e.skipped]
    geometry.save_spectra(out / "spectra.csv", keep,
                          report.metric_spectra[keep])
    print(f"mode={report.global_mode} median={report.global_median:g} "
          f"geometric_mean={report.global_geometric_mean:.4g} "
          f"mean={report.mean_local:.4g} skipped={report.skipped_count}")
    return 0


def _headline(report, aggregation: str) -> float:
    from . import estimator

    return estimator.aggregate(report.local_values(), aggregation)


def _cmd_baseline(resolved: dict) -> int:
    from . import baselines
    from .errors import InvalidInput

    dataset = _load_dataset(resolved["dataset"])
    out = _prepare_out(resolved, "baseline")
    try:
        if resolved["method"] == "twonn":
            result = baselines.twonn(dataset, resolved["discard_fraction"])
        elif resolved["method"] == "mle":
            result = baselines.mle_dimension(dataset, resolved["k"])
        else:
            raise CliError(f"unknown baseline {resolved['method']!r}; "
                           "choose twonn or mle")
    except InvalidInput as exc:
        raise CliError(str(exc)) from exc
    record = {"method": result.method, "estimate": result.estimate}
    record.update({f"param.{k}": v for k, v in result.params.items()})
    _write_key_values(out / "baseline_report.txt", record)
    print(f"{result.method} estimate={result.estimate:.6g}")
    return 0


def _parse_grid(text: str) -> list[float]:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError(f"bad grid {text!r}; use start:stop:step or a,b,c")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise CliError("grid step must be positive")
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(p) for p in text.split(",") if p.strip()]


def _cmd_sweep(resolved: dict) -> int:
    from . import baselines, datasets, estimator, training

    methods = [m.strip() for m in resolved["methods"].split(",") if m.strip()]
    for m in methods:
        if m not in SWEEP_METHODS:
            raise CliError(f"unknown sweep method {m!r}; valid: "
                           + ", ".join(SWEEP_METHODS))
    grid = _parse_grid(resolved["noise_grid"])
    if not grid:
        raise CliError("empty noise grid")

    from_file = resolved["data"] is not None
    if from_file:
        base = _load_dataset(resolved["data"])
        noise_model = resolved["noise_model"] or "feature_scaled"
    else:
        if resolved["manifold"] not in GENERATORS:
            raise CliError("sweep needs a manifold name or --data FILE")
        noise_model = resolved["noise_model"] or "additive"
    if noise_model not in ("additive", "feature_scaled"):
        raise CliError(f"unknown noise model {noise_model!r}")
    if from_file and noise_model == "additive":
        raise CliError("additive noise requires a generator manifold")
    if resolved["n"] is None and "qmetric" in methods:
        raise CliError("--n (Hilbert dimension) is required for qmetric")

    out = _prepare_out(resolved, "sweep")
    table = out / "sweep.csv"
    columns = ["noise", "method", "estimate", "mean_local", "median_local",
               "geometric_mean_local", "skipped"]
    done: dict[tuple[str, str], list[str]] = {}
    if table.exists():
        rows = table.read_text(encoding="utf-8").splitlines()
        for line in rows[1:]:
            cells = line.split(",")
            if len(cells) == len(columns):
                done[(cells[0], cells[1])] = cells

    for noise in grid:
        key_noise = _fmt(float(noise))
        todo = [m for m in methods if (key_noise, m) not in done]
        if not todo:
            continue
        if from_file:
            level = datasets.add_feature_scaled_noise(base, noise,
                                                      seed=resolved["seed"])
        else:
            gen_params = dict(resolved)
            gen_params["noise"] = noise
            level = _generate_dataset(gen_params)
        for m in todo:
            if m == "qmetric":
                cfg = training.TrainConfig(
                    hilbert_dim=resolved["n"],
                    fluctuation_weight=resolved["w"],
                    learning_rate=resolved["lr"],
                    epochs=resolved["epochs"],
                    batch_size=resolved["batch_size"],
                    seed=resolved["seed"],
                    optimizer=resolved["optimizer"],
                    init_scale=resolved["init_scale"],
                )
                trained, _ = training.train(level, cfg)
                report = estimator.estimate_dimensions(
                    trained, level, resolved["method"],
                    aspect=1.0,
                )
                estimate = _headline(report, resolved["aggregation"])
                row = [key_noise, m, _fmt(estimate), _fmt(report.mean_local),
                       _fmt(report.global_median),
                       _fmt(report.global_geometric_mean),
                       str(report.skipped_count)]
            elif m == "twonn":
                result = baselines.twonn(level, resolved["twonn_discard"])
                row = [key_noise, m, _fmt(result.estimate), "", "", "", ""]
            else:
                result = baselines.mle_dimension(level, resolved["mle_k"])
                row = [key_noise, m, _fmt(result.estimate), "", "", "", ""]
            done[(key_noise, m)] = row
            print(f"noise={key_noise} {m}: estimate={row[2]}")

    with open(table, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for noise in grid:
            for m in methods:
                row = done.get((_fmt(float(noise)), m))
                if row:
                    fh.write(",".join(row) + "\n")
    print(f"wrote {table}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "estimate": _cmd_estimate,
    "sweep": _cmd_sweep,
    "baseline": _cmd_baseline,
}


def _cap_threads(argv: list[str]) -> None:
    """Apply --threads to the BLAS pools before numpy is first imported."""
    value = None
    for i, arg in enumerate(argv):
        if arg == "--threads" and i + 1 < len(argv):
            value = argv[i + 1]
        elif arg.startswith("--threads="):
            value = arg.split("=", 1)[1]
    if value is None:
        return
    if "numpy" in sys.modules:
        return  # pools already sized; results do not depend on thread count
    for var in _THREAD_ENV_VARS:
        os.environ.setdefault(var, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _cap_threads(argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    from .errors import QudimError

    try:
        resolved = _resolve(args, args.command)
        return _COMMANDS[args.command](resolved)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except QudimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
