"""Importance-weighted likelihood reports for checkpoints from train_fixture.py.

Writes <kind>.report.json / .txt next to each checkpoint and prints the
AVAE-vs-MUSE conditional trajectory comparison.

Usage: python3 scripts/likelihood_table.py [--dir runs/fixture] [--n 200] [--k 1000]
"""

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from prg import data, eval as E, models as M


@dataclass
class TableConfig:
    dir: str = "runs/fixture"
    classes: str = "0123456789"
    n: int = 200
    k_marginal: int = 1000
    k_conditional: int = 1000
    seed: int = 1


def run(cfg: TableConfig) -> dict:
    folder = Path(cfg.dir)
    test = data.synth_glyphs(np.random.default_rng(cfg.seed), 50, cfg.classes)
    test = test.subset(np.sort(np.random.default_rng(0).choice(len(test), min(cfg.n, len(test)), replace=False)))
    reports = {}
    for kind in M.KINDS:
        ck = folder / f"{kind}.prgm"
        if not ck.exists():
            continue
        model, _ = M.load_model(ck)
        rep = E.likelihood_report(model, test, cfg.k_marginal, cfg.k_conditional, seed=0)
        rep.save(folder / f"{kind}.report")
        print(rep.to_table())
        reports[kind] = rep
    if "muse" in reports:
        for avae, cond in (("avae-ts", "S"), ("avae-ti", "I")):
            if avae in reports:
                name = E.quantity_name("T", cond)
                a, m = reports[avae].rows[name]["mean"], reports["muse"].rows[name]["mean"]
                verdict = "as expected" if a > m else "ORDER FLIPPED"
                print(f"{name}: {avae} {a:.2f} vs muse {m:.2f} ({verdict})")
    return reports


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dir", default=TableConfig.dir)
    ap.add_argument("--n", type=int, default=TableConfig.n)
    ap.add_argument("--k", type=int, default=TableConfig.k_conditional)
    args = ap.parse_args()
    run(TableConfig(dir=args.dir, n=args.n, k_marginal=args.k, k_conditional=args.k))


if __name__ == "__main__":
    main()
