"""Command-line front end.

Exit codes: 0 success, 1 I/O / format / argument errors, 2 no grid detected.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from gridscan import datagen, evaluate
from gridscan.config import PipelineConfig, load_config
from gridscan.errors import DegenerateGrid, EmptyDataset, FormatError, SpecError
from gridscan.grid import render_overlay, save_cells
from gridscan.imaging import load_image, save_image
from gridscan.pipeline import detect_grid, digitize
from gridscan.recognizer import CentroidModel, CnnRecognizer, centroid_fit, load_dataset
from gridscan.recognizer.network import TrainConfig, accuracy, default_arch, save_weights, train

log = logging.getLogger("gridscan")

EXIT_OK, EXIT_ERROR, EXIT_NO_GRID = 0, 1, 2


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    return cfg.updated(
        recognizer=getattr(args, "recognizer", None),
        weights=getattr(args, "weights", None),
    )


def _recognizer(cfg: PipelineConfig, seed: int):
    if cfg.recognizer == "cnn":
        if not cfg.weights:
            raise ValueError("the cnn recognizer needs --weights")
        return CnnRecognizer.from_file(cfg.weights)
    if cfg.weights:
        return CentroidModel.load(cfg.weights)
    ds = datagen.glyph_training_set(datagen.builtin_glyphs(seed=seed))
    return centroid_fit(ds.x, ds.y, ds.classes)


def _target(base: str | None, src: Path, many: bool, suffix: str) -> Path | None:
    if base is None:
        return None
    return Path(base) / f"{src.stem}{suffix}" if many else Path(base)


def cmd_digitize(args) -> int:
    cfg = _config(args)
    model = _recognizer(cfg, args.seed)
    inputs = [Path(p) for p in args.inputs]
    many = len(inputs) > 1
    if many:
        for d in (args.out, args.overlay):
            if d:
                Path(d).mkdir(parents=True, exist_ok=True)

    def run(src: Path) -> int:
        try:
            img = load_image(src)
            result = digitize(img, model, cfg)
        except DegenerateGrid as exc:
            print(f"{src}: no grid detected ({exc})", file=sys.stderr)
            return EXIT_NO_GRID
        out = _target(args.out, src, many, ".csv")
        evaluate.write_table_csv(result.table, out, header=args.header)
        overlay = _target(args.overlay, src, many, ".ppm")
        if overlay:
            save_image(render_overlay(result.detection.masks.gray, result.detection.grid), overlay)
        if args.cells_dir:
            save_cells(result.cells, Path(args.cells_dir) / src.stem if many else args.cells_dir)
        g = result.detection.grid
        print(f"{src}: {g.n_rows}x{g.n_cols} cells -> {out}")
        return EXIT_OK

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        codes = list(pool.map(run, inputs))
    return max(codes)


def cmd_grid_debug(args) -> int:
    cfg = _config(args)
    try:
        det = detect_grid(load_image(args.image), cfg)
    except DegenerateGrid as exc:
        print(f"{args.image}: no grid detected ({exc})", file=sys.stderr)
        return EXIT_NO_GRID
    if args.overlay:
        save_image(render_overlay(det.masks.gray, det.grid), args.overlay)
    text = (
        f"cols: {' '.join(map(str, det.grid.col_xs))}\n"
        f"rows: {' '.join(map(str, det.grid.row_ys))}\n"
        f"source_cols: {' '.join(map(str, det.source_grid.col_xs))}\n"
        f"source_rows: {' '.join(map(str, det.source_grid.row_ys))}\n"
    )
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args) -> int:
    ds = load_dataset(args.data_dir, args.labels)
    tr, te, va = datagen.split(ds, seed=args.seed)
    if len(tr) == 0:
        raise EmptyDataset("training split is empty")
    if args.recognizer == "centroid":
        model = centroid_fit(tr.x, tr.y, tr.classes)
        model.save(args.out)
        labels, _ = model.predict_inputs(te.x)
        acc = float((labels == te.y).mean()) if len(te) else float("nan")
        print(f"train_samples={len(tr)} test_accuracy={acc:.4f}")
        return EXIT_OK
    cfg = TrainConfig(epochs=args.epochs, batch=args.batch, lr=args.lr, momentum=args.momentum, seed=args.seed)
    arch = default_arch(len(ds.classes))
    result = train(tr.batch(), tr.y, cfg, arch)
    save_weights(result.weights, args.out)
    acc = accuracy(arch, result.weights, te.batch(), te.y)
    losses = " ".join(f"{v:.4f}" for v in result.epoch_losses)
    print(f"epoch_losses={losses}")
    print(f"final_train_loss={result.epoch_losses[-1]:.6f} test_accuracy={acc:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = evaluate.read_table_csv(args.pred)
    truth = evaluate.read_table_csv(args.truth)
    rep = evaluate.evaluate_tables(pred, truth)
    sys.stdout.write(evaluate.format_report(rep))
    if args.out:
        evaluate.write_report(rep, args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.digits:
        ds = datagen.make_digit_dataset(args.digits, seed=args.seed)
        path = datagen.write_digit_dataset(ds, args.out)
        print(f"wrote {len(ds)} digit samples; labels in {path}")
        return EXIT_OK
    glyphs = datagen.load_glyph_dir(args.glyphs) if args.glyphs else datagen.builtin_glyphs(seed=args.seed)
    spec = datagen.SheetSpec(
        rows=args.rows,
        cols=args.cols,
        cell_w=args.cell_w,
        cell_h=args.cell_h,
        line_thickness=args.thickness,
        blank_fraction=args.blank_fraction,
        seed=args.seed,
        line_jitter=args.jitter,
        glyphs=glyphs,
    )
    paths = datagen.write_sheets(spec, args.out, args.count)
    print(f"wrote {len(paths)} sheets to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridscan", description="Digitize grid-ruled handwritten marksheets.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def recog_flags(sp):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--recognizer", choices=("cnn", "centroid"))
        sp.add_argument("--weights", help="CNN weights (.gsw) or centroid model (.npz)")
        sp.add_argument("--seed", type=int, default=0, help="glyph seed for the default centroid model")

    d = sub.add_parser("digitize", help="image(s) -> CSV table")
    d.add_argument("inputs", nargs="+")
    d.add_argument("--out", required=True, help="CSV path, or a directory when several inputs are given")
    d.add_argument("--overlay", help="PPM path (directory for several inputs)")
    d.add_argument("--cells-dir", help="write cell_<row>_<col>.pgm crops here")
    d.add_argument("--header", action="store_true", help="emit a col_0..col_n header row")
    d.add_argument("--jobs", type=int, default=1)
    recog_flags(d)
    d.set_defaults(func=cmd_digitize)

    g = sub.add_parser("grid-debug", help="print detected line positions, optionally write an overlay")
    g.add_argument("image")
    g.add_argument("--overlay")
    g.add_argument("--out", help="also write the positions to this file")
    g.add_argument("--config")
    g.set_defaults(func=cmd_grid_debug)

    t = sub.add_parser("train", help="train a recognizer on a labeled PGM directory")
    t.add_argument("data_dir")
    t.add_argument("labels", help="CSV with filename,label rows")
    t.add_argument("--out", required=True)
    t.add_argument("--recognizer", choices=("cnn", "centroid"), default="cnn")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=5)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--momentum", type=float, default=0.9)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="compare a predicted table CSV with ground truth")
    e.add_argument("pred")
    e.add_argument("truth")
    e.add_argument("--out", help="report CSV (a .txt copy is written alongside)")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("gen", help="generate synthetic sheets or digit samples")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--rows", type=int, default=8)
    s.add_argument("--cols", type=int, default=12)
    s.add_argument("--cell-w", type=int, default=75)
    s.add_argument("--cell-h", type=int, default=100)
    s.add_argument("--thickness", type=int, default=2)
    s.add_argument("--jitter", type=int, default=0)
    s.add_argument("--blank-fraction", type=float, default=0.0)
    s.add_argument("--glyphs", help="directory of <class>/<name>.pgm glyphs")
    s.add_argument("--digits", type=int, default=0, help="write N digit samples + labels.csv instead of sheets")
    s.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except DegenerateGrid as exc:
        print(f"no grid detected: {exc}", file=sys.stderr)
        return EXIT_NO_GRID
    except (OSError, FormatError, SpecError, EmptyDataset, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
