"""Command-line front end.

Subcommands: simulate, train, eval, roc, sweep, autocorr, import-iq,
export-iq. Every run is driven by a TOML config (plus --set overrides
and the SPECSENSE_SEED environment variable) and echoes the resolved
config into its output directory. Report commands write CSV tables,
gnuplot-style .dat variants, and matplotlib figures side by side.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import baselines, evaluate, iqio, lstm, modelio
from .config import ConfigError, RunConfig
from .dataset import default_feature_context, make_dataset
from .evaluate import AccuracyRow, LstmSequenceDetector, RocPoint, SweepRow
from .features import NoiseModel
from .signals import Hypothesis, synth_fm

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _outdir(cfg: RunConfig, override) -> Path:
    out = Path(override) if override else Path(cfg.data["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    cfg.echo(out)
    return out


def _load_config(args) -> RunConfig:
    return RunConfig.load(args.config, overrides=args.set or ())


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg, args.out)
    dataset = make_dataset(cfg.dataset_config(), cfg.channel_config())
    iqio.save_dataset(dataset, out / "dataset")
    for split in ("train", "validation", "test"):
        records = dataset.split(split)
        busy = sum(1 for r in records if r.label == Hypothesis.H1)
        print(f"{split}: {len(records)} records ({len(records) - busy} idle, {busy} busy)")
    print(f"dataset written to {out / 'dataset'}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg, args.out)
    dataset_dir = Path(args.dataset) if args.dataset else out / "dataset"
    dataset = iqio.load_dataset(dataset_dir)
    hp = cfg.train_hyperparams()
    hidden = int(cfg.data["train"]["hidden_dim"])

    model = lstm.train(dataset, hp, hidden_dim=hidden)
    modelio.save_lstm(model, out / "lstm.bin")
    with open(out / "training_log.csv", "w", newline="\n") as fh:
        fh.write("epoch,train_loss,val_accuracy\n")
        for epoch, (loss, acc) in enumerate(model.training_log, start=1):
            fh.write(f"{epoch},{loss:.6g},{acc:.6g}\n")
    print(f"lstm: best epoch {model.best_epoch + 1}, "
          f"validation accuracy {model.training_log[model.best_epoch][1]:.4f}")

    if cfg.data["train"]["baselines"]:
        frames, labels = dataset.frames_and_labels("train")
        gnb = baselines.gnb_fit(frames, labels)
        modelio.save_gnb(gnb, out / "gnb.bin")
        mlp = baselines.mlp_fit(frames, labels,
                                hidden=int(cfg.data["train"]["mlp_hidden"]), hp=hp)
        modelio.save_mlp(mlp, out / "mlp.bin")
        print("baselines: gnb.bin, mlp.bin")
    if cfg.data["output"]["figures"]:
        from . import plots
        plots.save_training_plot(model.training_log, out / "training_log.png")
    return EXIT_OK


def _model_adapters(out: Path, model_paths) -> list:
    """(name, classify) pairs for accuracy_table from model files."""
    adapters = []
    for path in model_paths:
        kind, model = modelio.load_model(path)
        if kind == "lstm":
            def classify(rec, m=model):
                probs = lstm.forward(m.params, m.head, rec.features)
                return int(np.argmax(probs) == int(rec.label)), 1
        elif kind == "gnb":
            def classify(rec, m=model):
                probs = baselines.gnb_predict(m, rec.features)
                pred = np.argmax(probs, axis=1)
                return int(np.sum(pred == int(rec.label))), len(pred)
        else:
            def classify(rec, m=model):
                probs = baselines.mlp_forward(m, rec.features)
                pred = np.argmax(probs, axis=1)
                return int(np.sum(pred == int(rec.label))), len(pred)
        adapters.append((kind, classify))
    return adapters


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg, args.out)
    dataset_dir = Path(args.dataset) if args.dataset else out / "dataset"
    dataset = iqio.load_dataset(dataset_dir)
    model_paths = [Path(p) for p in args.model] if args.model else [
        p for p in (out / "lstm.bin", out / "gnb.bin", out / "mlp.bin") if p.exists()]
    if not model_paths:
        raise ConfigError("no model files found; pass --model or run `train` first")
    rows = evaluate.accuracy_table(_model_adapters(out, model_paths),
                                   dataset.split("test"))
    evaluate.write_results(rows, out / "acc.csv", kind=AccuracyRow)
    if cfg.data["output"]["figures"]:
        from . import plots
        plots.save_accuracy_plot(rows, out / "acc.png")
    for r in rows:
        print(f"{r.model} @ {r.snr_db:+.0f} dB: accuracy {r.accuracy:.4f} ({r.count} trials)")
    return EXIT_OK


def _frame_detectors(names, noise: NoiseModel, smoothing_l: int) -> list:
    table = {
        "energy": lambda: baselines.EnergyFrameDetector(noise),
        "mme": lambda: baselines.MmeFrameDetector(noise, L=smoothing_l),
        "gof": lambda: baselines.GofFrameDetector(noise),
    }
    dets = []
    for name in names:
        if name == "lstm":
            continue
        if name not in table:
            raise ConfigError(f"unknown detector {name!r}; choose from energy, mme, gof, lstm")
        dets.append(table[name]())
    return dets


def _lstm_detector(cfg: RunConfig, model_path, dataset_dir) -> LstmSequenceDetector:
    kind, model = modelio.load_model(model_path)
    if kind != "lstm":
        raise ConfigError(f"{model_path} holds a {kind} model, need the sequence classifier")
    dataset = iqio.load_dataset(dataset_dir)
    ctx = default_feature_context(dataset.config, dataset.channel)
    return LstmSequenceDetector(model, ctx, dataset.config.frame_len_N,
                                dataset.config.seq_len_T)


def cmd_roc(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg, args.out)
    ev = cfg.data["eval"]
    noise = NoiseModel(float(cfg.data["channel"]["noise_variance"]))
    names = [n.strip() for n in args.detectors.split(",")]
    detectors = _frame_detectors(names, noise, int(ev["smoothing_l"]))
    if "lstm" in names:
        if not args.model:
            raise ConfigError("detector 'lstm' needs --model and --dataset")
        dataset_dir = Path(args.dataset) if args.dataset else out / "dataset"
        detectors.append(_lstm_detector(cfg, args.model[0], dataset_dir))

    n = int(cfg.data["dataset"]["frame_len_n"])
    curves = {}
    for idx, det in enumerate(detectors):
        points = evaluate.detector_roc(
            det, float(ev["roc_snr_db"]), n, int(ev["roc_instances"]), noise,
            tone=cfg.fm_tone(), master_seed=cfg.master_seed + idx,
            num_points=int(ev["roc_points"]))
        curves[det.name] = points
        target = out / ("roc.csv" if idx == 0 else f"roc_{det.name}.csv")
        evaluate.write_results(points, target, kind=RocPoint)
    if cfg.data["output"]["figures"]:
        from . import plots
        plots.save_roc_plot(curves, out / "roc.png")
    print(f"roc curves at {ev['roc_snr_db']} dB written to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg, args.out)
    ev = cfg.data["eval"]
    noise = NoiseModel(float(cfg.data["channel"]["noise_variance"]))
    names = [n.strip() for n in args.detectors.split(",")]
    detectors = _frame_detectors(names, noise, int(ev["smoothing_l"]))
    if "lstm" in names:
        if not args.model:
            raise ConfigError("detector 'lstm' needs --model and --dataset")
        dataset_dir = Path(args.dataset) if args.dataset else out / "dataset"
        detectors.append(_lstm_detector(cfg, args.model[0], dataset_dir))
    rows = evaluate.snr_sweep(
        detectors, [float(s) for s in ev["snr_grid_db"]],
        [int(v) for v in ev["n_values"]], int(ev["trials"]), cfg.master_seed,
        noise, tone=cfg.fm_tone(), target_pf=float(ev["target_pf"]))
    evaluate.write_results(rows, out / "sweep.csv", kind=SweepRow)
    if cfg.data["output"]["figures"]:
        from . import plots
        plots.save_sweep_plot(rows, out / "sweep.png")
    print(f"{len(rows)} sweep rows written to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_autocorr(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg, args.out)
    ev = cfg.data["eval"]
    if args.iq:
        signal = iqio.read_iq(args.iq)
    else:
        d = cfg.data["dataset"]
        signal = synth_fm(float(d["fm_message_hz"]), float(d["fm_deviation_hz"]),
                          float(d["sample_rate_hz"]), int(ev["acf_samples"]),
                          cfg.master_seed)
    rho = evaluate.autocorrelation(signal, int(ev["acf_max_lag"]))
    evaluate.write_acf(rho, out / "acf.csv")
    if cfg.data["output"]["figures"]:
        from . import plots
        plots.save_acf_plot(rho, out / "acf.png")
    print(f"autocorrelation over {len(rho)} lags written to {out / 'acf.csv'}")
    return EXIT_OK


def cmd_import_iq(args) -> int:
    if args.raw_f32:
        if args.rate is None:
            raise ConfigError("--rate is required when importing raw float32 samples")
        signal = iqio.read_raw_f32(args.input, args.rate)
    else:
        signal = iqio.read_iq(args.input)
    clips = iqio.write_iq(signal, args.output, fmt=args.format)
    print(f"imported {len(signal)} samples at {signal.sample_rate_hz:g} Hz "
          f"-> {args.output} ({clips} clipped)")
    return EXIT_OK


def cmd_export_iq(args) -> int:
    cfg = _load_config(args)
    d = cfg.data["dataset"]
    signal = synth_fm(float(d["fm_message_hz"]), float(d["fm_deviation_hz"]),
                      float(d["sample_rate_hz"]), args.samples, cfg.master_seed)
    clips = iqio.write_iq(signal, args.output, fmt=args.format)
    print(f"wrote {args.samples} FM samples -> {args.output} ({clips} clipped)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specsense",
        description="Spectrum sensing toolkit: simulate, train, and evaluate "
                    "busy/idle channel classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML run configuration file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one config value (repeatable)")
        p.add_argument("--out", help="output directory (overrides output.directory)")

    p = sub.add_parser("simulate", help="generate a labeled feature dataset")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the sequence classifier (and baselines)")
    common(p)
    p.add_argument("--dataset", help="dataset directory (default: OUT/dataset)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-SNR accuracy of trained models on the test split")
    common(p)
    p.add_argument("--dataset", help="dataset directory (default: OUT/dataset)")
    p.add_argument("--model", action="append", help="model file (repeatable)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("roc", help="Monte-Carlo ROC curves at one SNR")
    common(p)
    p.add_argument("--detectors", default="energy,mme,gof",
                   help="comma list from energy, mme, gof, lstm")
    p.add_argument("--model", action="append", help="sequence model file (for lstm)")
    p.add_argument("--dataset", help="dataset directory (for lstm feature context)")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("sweep", help="Pd-vs-SNR Monte-Carlo sweep")
    common(p)
    p.add_argument("--detectors", default="energy,mme,gof",
                   help="comma list from energy, mme, gof, lstm")
    p.add_argument("--model", action="append", help="sequence model file (for lstm)")
    p.add_argument("--dataset", help="dataset directory (for lstm feature context)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("autocorr", help="normalized autocorrelation of a signal")
    common(p)
    p.add_argument("--iq", help="IQ container to analyze (default: synthesized FM)")
    p.set_defaults(func=cmd_autocorr)

    p = sub.add_parser("import-iq", help="convert a recording into the IQ container")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--raw-f32", action="store_true",
                   help="input is headerless interleaved float32")
    p.add_argument("--rate", type=float, help="sample rate for raw input (Hz)")
    p.add_argument("--format", default="f32", choices=["f32", "i16"])
    p.set_defaults(func=cmd_import_iq)

    p = sub.add_parser("export-iq", help="synthesize the FM tone into an IQ container")
    common(p)
    p.add_argument("output")
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--format", default="f32", choices=["f32", "i16"])
    p.set_defaults(func=cmd_export_iq)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
