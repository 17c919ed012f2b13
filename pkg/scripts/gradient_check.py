#!/usr/bin/env python3
"""Finite-difference check of every ED-LSTM parameter array on a tiny model."""
import argparse

from softfail.forecaster.gradcheck import check_gradients, tiny_problem

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--hidden", type=int, default=3)
ap.add_argument("--past", type=int, default=4, help="k; the encoder reads k + 1 inputs")
ap.add_argument("--future", type=int, default=3)
ap.add_argument("--batch", type=int, default=4)
ap.add_argument("--bias", action="store_true")
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--eps", type=float, default=1e-5)
args = ap.parse_args()

model, X, Y = tiny_problem(args.hidden, args.past, args.future, args.batch, args.seed, args.bias)
results = check_gradients(model, X, Y, args.eps)
print(f"{'parameter':<12} {'shape':>8} {'rel error':>11} {'max abs':>11}")
for r in results:
    shape = "x".join(map(str, r.analytic.shape))
    print(f"{r.name:<12} {shape:>8} {r.rel_error:11.2e} {r.max_abs_error:11.2e}")
worst = max(r.rel_error for r in results)
print(f"worst relative error {worst:.2e} ({'ok' if worst < 1e-4 else 'FAIL'})")
raise SystemExit(0 if worst < 1e-4 else 1)
