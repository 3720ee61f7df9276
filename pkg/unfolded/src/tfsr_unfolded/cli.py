"""CLI: train and evaluate the unfolded network against operator files."""

import argparse
import csv
import json
import sys

import numpy as np
import torch

from . import data
from .model import UnfoldedNet, psnr, ssim
from .operator import SensingFiles
from .train import evaluate_psnr, measure_batch, train


def _build_net(args, operator):
    return UnfoldedNet(operator, mode=args.mode, phases=args.phases,
                       seed=args.seed, eta_init=args.eta_init,
                       lam_init=args.lam_init)


def _patches(args):
    if args.synthetic:
        return data.synthetic_patches(args.patches, seed=args.seed)
    return data.image_patches(limit=args.patches, seed=args.seed)


def _cmd_train(args):
    operator = SensingFiles(args.operator)
    net = _build_net(args, operator)
    train_p, val_p = data.split(_patches(args))
    net, history = train(net, data.vectorize(train_p), data.vectorize(val_p),
                         epochs=args.epochs, lr=args.lr,
                         batch_size=args.batch_size, seed=args.seed)
    history.update(mode=args.mode, phases=args.phases, seed=args.seed,
                   operator=args.operator, lr=args.lr)
    with open(args.history, "w") as fh:
        json.dump(history, fh, indent=2)
    if args.weights:
        torch.save(net.state_dict(), args.weights)
    print(json.dumps({"history": args.history,
                      "epochs": history["epochs"],
                      "val_psnr_first": history["val_psnr"][0],
                      "val_psnr_last": history["val_psnr"][-1]}))


def _cmd_eval(args):
    operator = SensingFiles(args.operator)
    net = _build_net(args, operator)
    if args.weights:
        net.load_state_dict(torch.load(args.weights, weights_only=True))
    patches = _patches(args)
    vec = data.vectorize(patches)
    net.eval()
    with torch.no_grad():
        y, x = measure_batch(net, vec)
        x_hat = net(y).numpy()
    with open(args.metrics, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "psnr_db", "ssim"])
        for i, (a, b) in enumerate(zip(x_hat, vec)):
            writer.writerow([i, f"{psnr(a, b):.4f}",
                             f"{ssim(a, b, side=net.side):.4f}"])
    print(json.dumps({"metrics": args.metrics,
                      "mean_psnr_db": evaluate_psnr(net, vec),
                      "patches": len(patches)}))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="unfolded", description="deep-unfolded recovery network")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in (("train", _cmd_train), ("eval", _cmd_eval)):
        p = sub.add_parser(name)
        p.add_argument("--mode", choices=("ls", "tf", "rtf"), required=True)
        p.add_argument("--operator", required=True,
                       help="tfsr-matrix v1 file with sidecar + companions")
        p.add_argument("--phases", type=int, default=8)
        p.add_argument("--patches", type=int, default=300)
        p.add_argument("--synthetic", action="store_true",
                       help="procedural patches instead of sample images")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--eta-init", type=float, default=0.5)
        p.add_argument("--lam-init", type=float, default=0.01)
        if name == "train":
            p.add_argument("--epochs", type=int, default=20)
            p.add_argument("--lr", type=float, default=1e-3)
            p.add_argument("--batch-size", type=int, default=25)
            p.add_argument("--history", default="history.json")
            p.add_argument("--weights")
        else:
            p.add_argument("--weights")
            p.add_argument("--metrics", default="metrics.csv")
        p.set_defaults(func=handler)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        json.dump({"error": type(exc).__name__, "detail": str(exc)},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
