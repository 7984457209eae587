"""Train a text-conditioned model on the letters of some words, then write the words.

Each word produces <word>.csv (DMP rollout), <word>.dmp.json and <word>.svg,
exactly as ``prg write`` does.

Usage: python3 scripts/write_words.py [--words bell cat jump joy] [--out runs/words]
"""

import argparse
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from prg import cli, data, models as M


@dataclass
class WordsConfig:
    words: list[str] = field(default_factory=lambda: ["bell", "cat", "jump", "joy"])
    kind: str = "avae-ts"
    steps: int = 3000
    per_class: int = 200
    seed: int = 0
    out: str = "runs/words"


def run(cfg: WordsConfig) -> None:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    letters = "".join(sorted(set("".join(cfg.words))))
    ck = out / f"{cfg.kind}-{letters}.prgm"
    if not ck.exists():
        ds = data.synth_glyphs(np.random.default_rng(cfg.seed), cfg.per_class, letters)
        model = M.build_model(cfg.kind, seed=cfg.seed)
        tcfg = M.TrainConfig(steps=cfg.steps, seed=cfg.seed, log_every=min(500, cfg.steps))
        state = M.train(model, ds, tcfg,
                        on_log=lambda r: print("step", r["step"], "loss", round(r["loss"], 2), flush=True))
        M.save_model(ck, model, state)
    for word in cfg.words:
        cli.main(["--seed", str(cfg.seed), "write", str(ck), "--text", word, "--color-tags",
                  "--out-dir", str(out)])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--words", nargs="+", default=WordsConfig().words)
    ap.add_argument("--kind", choices=("cvae", "avae-ts", "muse"), default=WordsConfig.kind)
    ap.add_argument("--steps", type=int, default=WordsConfig.steps)
    ap.add_argument("--out", default=WordsConfig.out)
    args = ap.parse_args()
    run(WordsConfig(words=args.words, kind=args.kind, steps=args.steps, out=args.out))


if __name__ == "__main__":
    main()
