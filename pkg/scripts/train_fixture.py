"""Train every model kind on the 10-class synthetic fixture and report coherence.

Usage: python3 scripts/train_fixture.py [--out runs/fixture] [--steps 5000] [--kinds cvae muse]
"""

import argparse
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from prg import data, eval as E, models as M


@dataclass
class FixtureConfig:
    out: str = "runs/fixture"
    classes: str = "0123456789"
    per_class: int = 200
    test_per_class: int = 50
    steps: int = 5000
    seed: int = 0
    kinds: list[str] = field(default_factory=lambda: list(M.KINDS))


def fixture(cfg: FixtureConfig) -> tuple[data.Dataset, data.Dataset]:
    train = data.synth_glyphs(np.random.default_rng(cfg.seed), cfg.per_class, cfg.classes)
    test = data.synth_glyphs(np.random.default_rng(cfg.seed + 1), cfg.test_per_class, cfg.classes)
    return train, test


def run(cfg: FixtureConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test = fixture(cfg)
    cents = data.centroids(train)
    summary = {}
    for kind in cfg.kinds:
        model = M.build_model(kind, seed=cfg.seed)
        t0 = time.process_time()
        tcfg = M.TrainConfig(steps=cfg.steps, seed=cfg.seed, log_every=min(250, cfg.steps))
        state = M.train(model, train, tcfg,
                        on_log=lambda r: print(kind, r["step"], round(r["loss"], 2), flush=True))
        cpu = time.process_time() - t0
        M.save_model(out / f"{kind}.prgm", model, state)
        row = {"cpu_seconds": round(cpu, 1), "first_loss": state.history[0]["loss"],
               "last_loss": state.history[-1]["loss"]}
        if kind != "cvae":
            source = "S" if "S" in model.modalities else "I"
            row["coherence"] = E.cross_modal_accuracy(model, test, source, cents)
            row["coherence_sampled"] = E.cross_modal_accuracy(model, test, source, cents, sample=True,
                                                              rng=np.random.default_rng(0))
        summary[kind] = row
        print(kind, json.dumps(row), flush=True)
    (out / "summary.json").write_text(json.dumps({"config": asdict(cfg), "runs": summary}, indent=2) + "\n")
    return summary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=FixtureConfig.out)
    ap.add_argument("--steps", type=int, default=FixtureConfig.steps)
    ap.add_argument("--seed", type=int, default=FixtureConfig.seed)
    ap.add_argument("--kinds", nargs="+", choices=M.KINDS, default=list(M.KINDS))
    args = ap.parse_args()
    run(FixtureConfig(out=args.out, steps=args.steps, seed=args.seed, kinds=args.kinds))


if __name__ == "__main__":
    main()
