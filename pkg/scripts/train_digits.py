"""Train the CNN on synthetic digit cells with a 70/20/10 split and report
per-epoch loss plus validation and test accuracy."""

import argparse
import time

from gridscan.datagen import make_digit_dataset, split
from gridscan.recognizer.network import TrainConfig, accuracy, default_arch, save_weights, train


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", help="write the trained weights here")
    args = p.parse_args()

    t0 = time.perf_counter()
    ds = make_digit_dataset(args.samples, seed=args.seed)
    tr, te, va = split(ds, seed=args.seed)
    print(f"samples: train {len(tr)}  test {len(te)}  val {len(va)}  ({time.perf_counter() - t0:.1f} s to render)")
    arch = default_arch(len(ds.classes))
    cfg = TrainConfig(epochs=args.epochs, batch=args.batch, lr=args.lr, seed=args.seed)
    t0 = time.perf_counter()
    res = train(tr.batch(), tr.y, cfg, arch)
    print(f"initial loss {res.initial_loss:.4f}")
    for e, loss in enumerate(res.epoch_losses):
        print(f"epoch {e}: loss {loss:.4f}")
    print(f"val accuracy {accuracy(arch, res.weights, va.batch(), va.y):.4f}")
    print(f"test accuracy {accuracy(arch, res.weights, te.batch(), te.y):.4f}")
    print(f"training took {time.perf_counter() - t0:.1f} s")
    if args.out:
        save_weights(res.weights, args.out)


if __name__ == "__main__":
    main()
