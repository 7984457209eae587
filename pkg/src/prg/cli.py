"""Command line: ingest, augment, train, eval, write.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
The default seed comes from the PRG_SEED environment variable (else 0).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data, dmp, eval as E, models as M, pipeline as P, render
from .connect import ConnectConfig, ConnectError
from .tensor_nn.checkpoint import CheckpointError
from .tensor_nn.layers import ShapeError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DATA_ERRORS = (data.DataError, P.PipelineError, M.ModelError, E.EvalError, CheckpointError,
               ShapeError, FileNotFoundError, IsADirectoryError, NotADirectoryError)
NUMERIC_ERRORS = (FloatingPointError, dmp.DmpError, ConnectError)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    dataset: str | None = None
    kind: str = "muse"
    profile: str = "desk"
    composition: dict = field(default_factory=dict)  # CompositionConfig overrides
    connection: dict = field(default_factory=dict)  # ConnectConfig overrides
    dmp: dict = field(default_factory=dict)  # tau, basis_per_letter, dt
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in M.KINDS:
            raise UsageError(f"unknown model kind {self.kind!r}; expected one of {', '.join(M.KINDS)}")
        if self.profile not in M.PROFILES:
            raise UsageError(f"unknown profile {self.profile!r}; expected one of {', '.join(M.PROFILES)}")

    def composition_config(self) -> P.CompositionConfig:
        comp = dict(self.composition)
        height = comp.pop("height", 1.0)
        conn = {"delta": 0.02 * height, **self.connection}
        return P.CompositionConfig.scaled(height, connect=ConnectConfig(**conn), **comp)


def default_seed() -> int:
    raw = os.environ.get("PRG_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"PRG_SEED must be an integer, got {raw!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _print_counts(ds: data.Dataset) -> None:
    counts = ds.class_counts()
    print(f"{len(ds)} samples in {len(counts)} classes")
    for ch, n in counts.items():
        print(f"{ch}\t{n}")


# --- commands ----------------------------------------------------------------------------

def cmd_ingest(args, cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    if args.synthetic:
        ds = data.synth_glyphs(rng, per_class=args.per_class, classes=args.classes or data.ALPHABET)
    else:
        if args.path is None:
            raise UsageError("ingest needs a UJIpenchars path or --synthetic")
        path = Path(args.path)
        if not path.is_file():
            raise FileNotFoundError(f"no such file: {path}")
        ds = data.Dataset.from_samples([data.make_sample(s, lab) for s, lab in data.load_ujipen(path)],
                                       "ingested")
        if args.classes:
            ds = ds.with_classes([data.label_of(c) for c in args.classes])
    data.check_invariants(ds)
    data.save_dataset(ds, args.out)
    _print_counts(ds)
    return EXIT_OK


def cmd_augment(args, cfg: RunConfig) -> int:
    ds = data.load_dataset(args.dataset)
    out = data.augment(ds, args.target, np.random.default_rng(cfg.seed))
    data.check_invariants(out)
    data.save_dataset(out, args.out)
    _print_counts(out)
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    ds = data.load_dataset(args.dataset)
    if args.classes:
        ds = ds.with_classes([data.label_of(c) for c in args.classes])
    tcfg = M.TrainConfig(steps=args.steps, batch_size=args.batch_size, lr=args.lr, seed=cfg.seed,
                         log_every=args.log_every)
    if args.resume:
        model, state = M.load_model(args.resume)
        if state is None:
            raise data.DataError(f"{args.resume} has no optimizer state to resume from")
    else:
        model, state = M.build_model(cfg.kind, cfg.profile, seed=cfg.seed), None
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".loss.csv")
    fresh = not (args.resume and log_path.exists())
    with open(log_path, "w" if fresh else "a", newline="") as fh:
        writer = None

        def on_log(rec):
            nonlocal writer
            if writer is None:
                writer = csv.DictWriter(fh, fieldnames=list(rec), lineterminator="\n")
                if fresh:
                    writer.writeheader()
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in rec.items()})
            fh.flush()
            if not args.quiet:
                print(f"step {rec['step']}\tloss {rec['loss']:.4f}")

        state = M.train(model, ds, tcfg, state, on_log)
    M.save_model(args.out, model, state)
    print(f"saved {model.kind} at step {state.step} to {args.out}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    model, _ = M.load_model(args.checkpoint)
    ds = data.load_dataset(args.dataset)
    classes = args.classes or "".join(sorted({data.ALPHABET[i] for i in ds.labels}))
    ds = ds.with_classes([data.label_of(c) for c in classes])
    if args.limit and len(ds) > args.limit:
        ds = ds.subset(np.sort(np.random.default_rng(cfg.seed).choice(len(ds), args.limit, replace=False)))
    report = E.likelihood_report(model, ds, args.k_marginal, args.k_conditional, seed=cfg.seed)
    js, txt = report.save(args.out)
    print(report.to_table(), end="")
    if "S" in model.modalities or "I" in model.modalities:
        acc = E.cross_modal_accuracy(model, ds)
        print(f"cross-modal accuracy {acc:.3f}")
    print(f"wrote {js} and {txt}")
    return EXIT_OK


def load_images(folder) -> np.ndarray:
    """Letter images from ``folder`` in file-name order: ``.npy`` arrays or ``.pgm`` files."""
    folder = Path(folder)
    if not folder.is_dir():
        raise FileNotFoundError(f"no such directory: {folder}")
    files = sorted(p for p in folder.iterdir() if p.suffix in (".npy", ".pgm"))
    if not files:
        raise data.DataError(f"{folder} holds no .npy or .pgm images")
    return np.stack([np.load(f) if f.suffix == ".npy" else read_pgm(f) for f in files])


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    # header: magic, width, height, maxval (comments start with '#')
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos)
            continue
        end = pos
        while end < len(raw) and not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode())
        pos = end
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == "P5":
        arr = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8).astype(np.float64)
    elif magic == "P2":
        arr = np.array(raw[pos:].split(), dtype=np.float64)[:w * h]
    else:
        raise data.DataError(f"{path}: unsupported image format {magic}")
    if arr.size != w * h:
        raise data.DataError(f"{path}: truncated image")
    return arr.reshape(h, w) * (255.0 / maxval)


def cmd_write(args, cfg: RunConfig) -> int:
    if (args.text is None) == (args.images is None):
        raise UsageError("write needs exactly one of --text or --images")
    model, _ = M.load_model(args.checkpoint)
    if args.text is not None:
        command = P.WordCommand(text=args.text)
    else:
        command = P.WordCommand(images=load_images(args.images))
    labels = P.perceive_text(args.labels) if args.labels else None
    comp = cfg.composition_config()
    rng = np.random.default_rng(cfg.seed)
    word = P.compose_word(command, model, comp, labels=labels, sample=args.sample, rng=rng)
    n_basis = args.basis_per_letter * len(word.letters)
    params = dmp.fit_dmp(word.full, tau=args.tau, n_basis=n_basis)
    t, x = dmp.rollout(params)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.name or (args.text if args.text is not None else "word")
    paths = {"trajectory": out / f"{stem}.csv", "dmp": out / f"{stem}.dmp.json", "svg": out / f"{stem}.svg"}
    dmp.write_csv(paths["trajectory"], t, x)
    dmp.save_dmp(params, paths["dmp"])
    paths["svg"].write_text(render.svg(word, color_tags=args.color_tags))
    chars = "".join(data.ALPHABET[i] for i in word.labels)
    print(f"{chars}: {len(word.letters)} letters, {len(word.connections)} connections, "
          f"{len(word.full)} points, DMP with {n_basis} basis functions")
    for kind, p in paths.items():
        print(f"{kind}\t{p}")
    return EXIT_OK


# --- parser -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prg", description="Handwriting generation from text, images or trajectories.")
    parser.add_argument("--seed", type=int, default=None, help="random seed (default: $PRG_SEED or 0)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ingest", help="build a dataset file from UJIpenchars or synthetic glyphs")
    p.add_argument("path", nargs="?")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--classes", default=None, help="restrict to these characters")
    p.add_argument("--out", required=True)

    p = sub.add_parser("augment", help="top up every class to a target count")
    p.add_argument("dataset")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a model and log the loss curve")
    p.add_argument("dataset")
    p.add_argument("--kind", choices=M.KINDS, default="muse")
    p.add_argument("--profile", choices=tuple(M.PROFILES), default="desk")
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--classes", default=None)
    p.add_argument("--log-every", type=int, default=50)
    p.add_argument("--log", default=None, help="loss CSV (default: <out>.loss.csv)")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="importance-weighted likelihood report")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.add_argument("--k-marginal", type=int, default=E.K_MARGINAL)
    p.add_argument("--k-conditional", type=int, default=E.K_CONDITIONAL)
    p.add_argument("--limit", type=int, default=200, help="evaluate a random subset of this size")
    p.add_argument("--classes", default=None)
    p.add_argument("--out", required=True, help="output stem for .json and .txt")

    p = sub.add_parser("write", help="write a word: trajectory CSV, DMP JSON and SVG")
    p.add_argument("checkpoint")
    p.add_argument("--text", default=None)
    p.add_argument("--images", default=None, help="directory of letter images (.npy or .pgm)")
    p.add_argument("--labels", default=None, help="letters used for sizing image input")
    p.add_argument("--sample", action="store_true", help="sample latents instead of posterior means")
    p.add_argument("--height", type=float, default=1.0)
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--drop", type=float, default=None)
    p.add_argument("--gap", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--alpha-max", type=float, default=None)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--basis-per-letter", type=int, default=30)
    p.add_argument("--color-tags", action="store_true", help="color letters and connections")
    p.add_argument("--name", default=None, help="output file stem")
    p.add_argument("--out-dir", default=".")
    return parser


def run_config(args) -> RunConfig:
    seed = args.seed if args.seed is not None else default_seed()
    cfg = RunConfig(args.command, seed, getattr(args, "dataset", None), getattr(args, "kind", "muse"),
                    getattr(args, "profile", "desk"))
    if args.command == "write":
        cfg.composition = {k: v for k, v in (("height", args.height), ("ratio", args.ratio),
                                            ("drop", args.drop), ("gap", args.gap)) if v is not None}
        cfg.connection = {k: v for k, v in (("delta", args.delta), ("alpha_max", args.alpha_max))
                          if v is not None}
        cfg.dmp = {"tau": args.tau, "basis_per_letter": args.basis_per_letter}
    return cfg


COMMANDS = {"ingest": cmd_ingest, "augment": cmd_augment, "train": cmd_train, "eval": cmd_eval,
            "write": cmd_write}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing command; choose one of " + ", ".join(COMMANDS))
        cfg = run_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NUMERIC_ERRORS as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # remaining value errors come from invalid option values
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
