"""Command-line interface.

Exit status: 0 on success, 1 on domain errors (bad molecules, files, weights),
2 on usage errors.
"""
import argparse
import logging
import sys
from importlib import resources

import numpy as np

from .canon import AttachmentRegistry
from .engine import (
    AXES, FragmentCountPredictor, IdentityPredictor, NearestNeighborPredictor,
    TrainConfig, calibrate, load_model, save_model, train,
)
from .engine.training import FragmentInitializer, fragment_sets
from .io import Vocabulary, build_vocabulary, ingest_csv
from .molgraph import MoleculeError, parse_smiles, write_canonical_smiles
from .model import WeightFormatError, load_weights, save_weights
from .story import decompose, format_story, parse_story, replay_story, unroll_story

log = logging.getLogger("molstory")


def _default(name):
    return str(resources.files("molstory") / "data" / name)


def _config(args, **overrides):
    base = TrainConfig.from_file(args.config) if getattr(args, "config", None) else TrainConfig()
    for key in ("seed", "provider", "topk"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return base.replace(**overrides)


def _vocab(args):
    return Vocabulary.load(args.vocab or _default("default.vocab"))


def _model(args):
    vocab = _vocab(args)
    model = load_model(args.weights or _default("default.weights"), vocab)
    if args.provider:
        model.provider = args.provider
    if args.topk:
        model.topk = args.topk
    return model


def cmd_build_vocab(args):
    vocab = build_vocabulary(ingest_csv(args.csv))
    if args.vocab:
        vocab.save(args.vocab)
    else:
        sys.stdout.write(vocab.dumps())


def cmd_decompose(args):
    m = parse_smiles(args.smiles)
    dec = decompose(m)
    registry = _vocab(args).registry if args.vocab else AttachmentRegistry()
    for i, (fi, (cf, _)) in enumerate(zip(dec.fragments, dec.placements)):
        print(f"fragment {i} {fi.kind} {cf.smiles} atoms={','.join(map(str, fi.global_atoms))}")
    for att in dec.attachments:
        sides = []
        for side in att.fragment_pair:
            cf, fmap = dec.placements[side]
            local = dec.fragments[side].global_to_local
            tup = tuple(fmap[local[g]] for g in att.shared_atoms)
            sides.append(str(registry.register(cf, tup, count=False) if not args.vocab else registry.lookup(cf, tup)))
        i, j = att.fragment_pair
        print(f"attachment {i}-{j} shared={','.join(map(str, att.shared_atoms))} standard={sides[0]}|{sides[1]}")


def cmd_unroll(args):
    story = unroll_story(parse_smiles(args.smiles), np.random.default_rng(args.seed or 0))
    sys.stdout.write(format_story(story))


def cmd_replay(args):
    text = sys.stdin.read() if args.story == "-" else open(args.story).read()
    print(write_canonical_smiles(replay_story(parse_story(text))))


def cmd_train(args):
    cfg = _config(args)
    records = ingest_csv(args.csv)
    model, metrics = train(records, cfg)
    for row in metrics["history"]:
        acc = row.get("valid_accuracy", float("nan"))
        print(f"epoch {row['epoch']} loss {row['loss']:.6g} train_acc {row['train_accuracy']:.6g} valid_acc {acc:.6g}")
    if "test_accuracy" in metrics:
        print(f"test_acc {metrics['test_accuracy']:.6g}")
    model.vocabulary_.save(args.vocab or "vocab.txt")
    save_model(model, args.weights or "model.weights")


def cmd_train_init(args):
    cfg = _config(args)
    records = ingest_csv(args.csv)
    vocab = _vocab(args)
    actions = vocab.action_vocabulary()
    decs, conds = [], []
    for r in records:
        try:
            d = decompose(parse_smiles(r.smiles))
            fragment_sets([d], actions)
        except MoleculeError as exc:
            log.warning("skipping %s: %s", r.smiles, exc)
            continue
        decs.append(d)
        conds.append(r.conditions)
    X = np.array(conds)
    X = (X - X.mean(axis=0)) / np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
    est = FragmentInitializer(cfg.init_hidden, cfg.init_epochs, cfg.init_learning_rate, cfg.seed)
    est.fit(X, fragment_sets(decs, actions))
    print(f"bce {est.loss_curve_[-1]:.6g}")
    save_weights(args.weights or "init.weights", est.params_, {"kind": "initializer"})


def cmd_generate(args):
    model = _model(args)
    cond = [args.logS, args.redox, args.sa]
    for k, seed in enumerate(np.random.SeedSequence(args.seed or 0).spawn(args.n)):
        mol, story = model.generate(cond, seed=seed)
        print(write_canonical_smiles(mol))
        sys.stdout.write(format_story(story))


def cmd_calibrate(args):
    model = _model(args)
    records = ingest_csv(args.csv)
    if args.predictor == "identity":
        pred = IdentityPredictor().fit()
    elif args.predictor == "synthetic":
        pred = FragmentCountPredictor(args.axis).fit()
    else:
        k = AXES.index(args.axis)
        pred = NearestNeighborPredictor().fit([r.smiles for r in records], [r.conditions[k] for r in records])
    report = calibrate(records, args.axis, model, pred, args.prompts, args.per_prompt, args.seed or 0)
    if args.out:
        report.to_csv(args.out)
    else:
        report.write(sys.stdout)
    print(f"novelty_ratio {report.novelty_ratio:.6g}")


def cmd_inspect_weights(args):
    tensors, meta = load_weights(args.weights_file)
    for k in sorted(meta):
        print(f"meta {k}={meta[k]}")
    for name in sorted(tensors):
        t = tensors[name]
        print(f"tensor {name} shape={'x'.join(map(str, t.shape)) or 'scalar'} norm={np.linalg.norm(t):.6g}")


def build_parser():
    p = argparse.ArgumentParser(prog="molstory", description="Fragment-story molecule generation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, *flags):
        sp = sub.add_parser(name)
        sp.set_defaults(func=fn)
        for flag in flags:
            if flag == "seed":
                sp.add_argument("--seed", type=int)
            elif flag == "config":
                sp.add_argument("--config")
            elif flag == "vocab":
                sp.add_argument("--vocab")
            elif flag == "weights":
                sp.add_argument("--weights")
            elif flag == "provider":
                sp.add_argument("--provider", choices=["topological", "force-relaxed", "none"])
            elif flag == "topk":
                sp.add_argument("--topk", type=int)
        return sp

    add("build-vocab", cmd_build_vocab, "vocab").add_argument("csv")
    add("decompose", cmd_decompose, "vocab").add_argument("smiles")
    add("unroll", cmd_unroll, "seed").add_argument("smiles")
    add("replay", cmd_replay).add_argument("story", help="story file, or - for stdin")
    add("train", cmd_train, "seed", "config", "vocab", "weights", "provider", "topk").add_argument("csv")
    add("train-init", cmd_train_init, "seed", "config", "vocab", "weights").add_argument("csv")
    g = add("generate", cmd_generate, "seed", "vocab", "weights", "provider", "topk")
    g.add_argument("--logS", type=float, required=True)
    g.add_argument("--redox", type=float, required=True)
    g.add_argument("--sa", type=float, required=True)
    g.add_argument("-n", type=int, default=1)
    c = add("calibrate", cmd_calibrate, "seed", "vocab", "weights", "provider", "topk")
    c.add_argument("csv")
    c.add_argument("--axis", choices=AXES, default="logS")
    c.add_argument("--predictor", choices=["nn", "synthetic", "identity"], default="nn")
    c.add_argument("--prompts", type=int, default=30)
    c.add_argument("--per-prompt", type=int, default=30)
    c.add_argument("--out")
    add("inspect-weights", cmd_inspect_weights).add_argument("weights_file")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (MoleculeError, WeightFormatError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
