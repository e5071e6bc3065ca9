"""Generate synthetic marksheets, digitize them with the centroid baseline and
report grid error, cell accuracy and timing per line thickness."""

import argparse
import time

from gridscan.datagen import SheetSpec, builtin_glyphs, glyph_training_set, render_sheet, sheet_lines
from gridscan.evaluate import EvalCounts, compare_tables, format_report, report
from gridscan.pipeline import digitize
from gridscan.recognizer import centroid_fit


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sheets", type=int, default=20)
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=12)
    p.add_argument("--thickness", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    p.add_argument("--jitter", type=int, default=0)
    p.add_argument("--blank-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    glyphs = builtin_glyphs(seed=args.seed)
    ds = glyph_training_set(glyphs)
    model = centroid_fit(ds.x, ds.y, ds.classes)
    total = EvalCounts()
    print("thickness  sheets  exact_grid  max_err_px  cell_acc  sec/sheet")
    for t in args.thickness:
        exact, worst, counts, secs = 0, 0.0, EvalCounts(), 0.0
        for k in range(args.sheets):
            spec = SheetSpec(
                rows=args.rows, cols=args.cols, line_thickness=t, line_jitter=args.jitter,
                blank_fraction=args.blank_fraction, seed=args.seed + k, glyphs=glyphs,
            )
            img, truth = render_sheet(spec)
            t0 = time.perf_counter()
            res = digitize(img, model)
            secs += time.perf_counter() - t0
            g = res.detection.source_grid
            xs, ys = sheet_lines(spec)
            if (len(g.col_xs), len(g.row_ys)) == (len(xs), len(ys)):
                exact += 1
                worst = max(worst, *(abs(a - b) for a, b in zip(g.col_xs + g.row_ys, xs + ys)))
            counts += compare_tables(res.table, truth)
        rep = report(counts)
        total += counts
        acc = "n/a" if rep.accuracy is None else f"{100 * rep.accuracy:.2f}%"
        print(f"{t:>9}  {args.sheets:>6}  {exact:>10}  {worst:>10.1f}  {acc:>8}  {secs / args.sheets:>9.2f}")
    print()
    print(format_report(report(total)), end="")


if __name__ == "__main__":
    main()
