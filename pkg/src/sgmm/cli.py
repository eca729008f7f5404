"""Command-line harness.

Subcommands:

    gen-synth   write a synthetic planted-signal corpus
    train       run an experiment from a JSON config file
    eval        score a trained run on a dataset, optionally ablated
    explain     per-feature attribution for one record of a dataset
    cmsg-build  fuse a text and a visual scene graph into one file
    node2vec    structural node embeddings for one scene graph
    gradcheck   compare analytic gradients against finite differences

Exit codes: 0 success, 1 runtime failure (bad data, missing file),
2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import autodiff
from .autodiff import Tensor, bce_loss, gradcheck
from .checkpoint import write_checkpoint
from .data import load_dataset
from .encoder import EncoderConfig
from .errors import ConfigError, InputError, SgmmError
from .experiment import load_experiment_config, load_run, run_experiment
from .explain import explain_example, render_text, report_to_doc
from .fusion import fuse_dummy_node, fuse_exact_merge, fuse_similarity_merge
from .model import (ABLATION_FLAGS, ModelConfig, apply_ablation,
                    evaluate_prepared, forward_probability, init_model_params,
                    prepare_dataset, prepare_example)
from .node2vec import Node2VecConfig, node2vec_embed
from .rng import stream
from .scenegraph import parse_scene_graph, serialize_scene_graph, to_plain_graph
from .synth import SynthSpec, gen_synth
from .wordvec import WordVectorTable, bundled_word_vectors, load_word_vectors

GRADCHECK_TOL = 1e-4


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_gen_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(n_train=args.n_train, n_test=args.n_test,
                     class_balance=args.balance, seed=args.seed,
                     signal=args.signal, image_size=args.image_size,
                     graph_min=args.graph_min, graph_max=args.graph_max)
    manifest = gen_synth(spec, args.out)
    print(f"wrote {spec.n_train} train + {spec.n_test} test examples "
          f"(signal={spec.signal}) -> {manifest}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config)
    metrics = run_experiment(cfg)
    test = metrics["test"]
    line = f"run complete -> {cfg.output_dir}"
    line += f" | train acc {metrics['train']['accuracy']:.4f}"
    if test is not None:
        line += f" | test acc {test['accuracy']:.4f}"
    print(line)
    return 0


def _split_examples(examples, split: str):
    if split == "all":
        return examples
    chosen = [e for e in examples if e.split == split]
    if not chosen:
        raise InputError(f"dataset has no {split!r} examples")
    return chosen


def _cmd_eval(args: argparse.Namespace) -> int:
    run = load_run(args.checkpoint)
    examples = _split_examples(load_dataset(args.dataset), args.split)
    if args.ablate:
        examples = [apply_ablation(e, args.ablate) for e in examples]
    preps = prepare_dataset(examples, run.vocab, run.table(), run.model,
                            run.train.seed, ())
    report = evaluate_prepared(preps, run.params, run.model)
    text = json.dumps(report, indent=2, ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_explain(args: argparse.Namespace) -> int:
    run = load_run(args.checkpoint)
    examples = load_dataset(args.dataset)
    matches = [e for e in examples if e.id == args.record]
    if not matches:
        raise InputError(f"no record with id {args.record!r} in {args.dataset}")
    prep = prepare_example(matches[0], run.vocab, run.table(), run.model,
                           run.train.seed, ())
    report = explain_example(prep, run.params, run.model, method=args.method,
                             n_samples=args.samples, seed=args.seed)
    sys.stdout.write(render_text(report))
    if args.out:
        doc = report_to_doc(report)
        Path(args.out).write_text(
            json.dumps(doc, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


def _cmd_cmsg_build(args: argparse.Namespace) -> int:
    if args.type != 3:
        if args.threshold is not None:
            raise ConfigError("--threshold applies only to --type 3")
        if args.vectors is not None:
            raise ConfigError("--vectors applies only to --type 3")
    tsg = parse_scene_graph(Path(args.tsg).read_bytes(), default_modality="text")
    vsg = parse_scene_graph(Path(args.vsg).read_bytes(), default_modality="visual")
    if args.type == 1:
        fused = fuse_dummy_node(tsg, vsg)
    elif args.type == 2:
        fused = fuse_exact_merge(tsg, vsg)
    else:
        if args.threshold is None:
            raise ConfigError("--type 3 needs --threshold")
        table = (bundled_word_vectors() if args.vectors is None
                 else load_word_vectors(Path(args.vectors).read_bytes()))
        fused, warnings = fuse_similarity_merge(tsg, vsg, table,
                                                args.threshold, seed=args.seed)
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
    payload = serialize_scene_graph(fused)
    if args.out:
        Path(args.out).write_bytes(payload)
        print(f"wrote {args.out} ({len(fused.nodes)} nodes, "
              f"{len(fused.edges)} edges)")
    else:
        sys.stdout.write(payload.decode("utf-8"))
    return 0


def _cmd_node2vec(args: argparse.Namespace) -> int:
    graph = parse_scene_graph(Path(args.graph).read_bytes())
    plain = to_plain_graph(graph)
    cfg = Node2VecConfig(p=args.p, q=args.q, walk_length=args.walk_length,
                         walks_per_node=args.walks_per_node,
                         window=args.window, embedding_dim=args.dim,
                         negative_samples=args.negatives, epochs=args.epochs,
                         seed=args.seed)
    embeddings = node2vec_embed(plain, cfg)
    write_checkpoint(args.out, {"embeddings": embeddings})
    print(f"wrote {args.out} (embeddings {embeddings.shape[0]} x "
          f"{embeddings.shape[1]})")
    return 0


# ---------------------------------------------------------------------------
# gradcheck suite


def _op_checks(eps: float, max_entries: int | None, seed: int
               ) -> list[tuple[str, dict[str, float]]]:
    rng = stream(seed, "gradcheck-cli")
    results = []

    def param(shape) -> Tensor:
        return Tensor(rng.standard_normal(shape), requires_grad=True)

    w, b = param((4, 3)), param((3,))
    x = rng.standard_normal((5, 4))

    def affine_relu():
        h = autodiff.relu(Tensor(x) @ w + b)
        return autodiff.sum_all(h * h)
    results.append(("matmul+add+relu",
                    gradcheck(affine_relu, {"w": w, "b": b}, eps=eps,
                              max_entries=max_entries, seed=seed)))

    s = param((3, 6))

    def softmax_mix():
        return autodiff.sum_all(autodiff.softmax(s, axis=-1) * Tensor(x[:3, :2] @ np.ones((2, 6))))
    results.append(("softmax", gradcheck(softmax_mix, {"s": s}, eps=eps,
                                         max_entries=max_entries, seed=seed)))

    g = param((4, 8))

    def layernorm_loss():
        return autodiff.sum_all(autodiff.layernorm(g) * Tensor(np.arange(32.0).reshape(4, 8)))
    results.append(("layernorm", gradcheck(layernorm_loss, {"g": g}, eps=eps,
                                           max_entries=max_entries, seed=seed)))

    z = Tensor(np.array(0.3), requires_grad=True)

    def sigmoid_bce():
        return bce_loss(autodiff.sigmoid(z), 1)
    results.append(("sigmoid+bce", gradcheck(sigmoid_bce, {"z": z}, eps=eps,
                                             max_entries=max_entries, seed=seed)))

    d = param((6, 5))

    def dropout_path():
        kept = autodiff.dropout(d, 0.4, key=(seed, "cli-drop", 0), training=True)
        return autodiff.sum_all(kept * kept)
    results.append(("dropout", gradcheck(dropout_path, {"d": d}, eps=eps,
                                         max_entries=max_entries, seed=seed)))

    e = param((7, 4))

    def gather_pool():
        rows = autodiff.gather_rows(e, [0, 2, 2, 5])
        return autodiff.sum_all(autodiff.mean_pool(rows) * Tensor(np.arange(4.0)))
    results.append(("gather+mean_pool",
                    gradcheck(gather_pool, {"e": e}, eps=eps,
                              max_entries=max_entries, seed=seed)))
    return results


def _tiny_model_check(eps: float, max_entries: int | None, seed: int
                      ) -> dict[str, float]:
    from .model import Example  # local import keeps the CLI header light
    from .scenegraph import Node, make_scene_graph

    cfg = ModelConfig(encoder=EncoderConfig(d_model=8, n_heads=2, n_layers=1,
                                            d_ff=16, max_len=16),
                      vocab_size=16, word_dim=8, gcn_hidden=6, gcn_out=5,
                      head_hidden=7)
    rng = stream(seed, "gradcheck-model")
    table = WordVectorTable(dim=8, vectors={
        w: rng.standard_normal(8) for w in ("man", "woman", "speaking")})
    tsg = make_scene_graph(
        [Node(0, "object", "man"), Node(1, "relationship", "speaking"),
         Node(2, "object", "woman")], [(0, 1), (1, 2)], modality="text")
    vsg = make_scene_graph(
        [Node(0, "object", "woman"), Node(1, "attribute", "tall")],
        [(0, 1)], modality="visual")
    image = rng.integers(0, 256, size=(16, 16, 3), dtype=np.int64).astype(np.uint8)
    example = Example(id="g0", text="a man speaking", image=image, tsg=tsg,
                      vsg=vsg, label=1, split="train")
    from .encoder import build_vocab
    vocab = build_vocab([example.text], cfg.vocab_size)
    prep = prepare_example(example, vocab, table, cfg, seed, ())
    params = init_model_params(cfg, len(vocab), seed)

    def loss():
        p = forward_probability(prep, params, cfg, training=False)
        return bce_loss(p, example.label)
    return gradcheck(loss, params, eps=eps, max_entries=max_entries, seed=seed)


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    groups = _op_checks(args.eps, args.max_entries, args.seed)
    groups.append(("full-model", _tiny_model_check(args.eps,
                                                   args.max_entries,
                                                   args.seed)))
    failed = False
    for name, errors in groups:
        worst = max(errors.values()) if errors else 0.0
        ok = worst <= args.tol
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: max rel err "
              f"{worst:.3e} (tol {args.tol:.1e})")
        if not ok:
            for pname, err in sorted(errors.items(), key=lambda kv: -kv[1]):
                if err > args.tol:
                    print(f"     {pname}: {err:.3e}")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgmm",
        description="hybrid text/image/scene-graph misinformation classifier")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-train", type=int, default=200)
    p.add_argument("--n-test", type=int, default=50)
    p.add_argument("--balance", type=float, default=0.5,
                   help="fraction of fake examples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--signal", default="mixed",
                   choices=("text", "image", "tsg", "vsg", "mixed"))
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--graph-min", type=int, default=4)
    p.add_argument("--graph-max", type=int, default=9)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("train", help="train from a JSON config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score a trained run")
    p.add_argument("--checkpoint", required=True,
                   help="checkpoint.ckpt inside a run directory")
    p.add_argument("--dataset", required=True, help="manifest.jsonl path")
    p.add_argument("--split", default="test", choices=("train", "test", "all"))
    p.add_argument("--ablate", action="append", default=[],
                   choices=ABLATION_FLAGS, help="repeatable input ablation")
    p.add_argument("--out", help="write metrics JSON here instead of stdout")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("explain", help="feature attribution for one record")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--record", required=True, help="record id to explain")
    p.add_argument("--method", default="auto",
                   choices=("auto", "exact", "permutation"))
    p.add_argument("--samples", type=int, default=200,
                   help="permutation sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="also write a JSON report here")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("cmsg-build", help="fuse text + visual scene graphs")
    p.add_argument("--type", type=int, required=True, choices=(1, 2, 3),
                   help="1 shared hub, 2 exact label merge, 3 similarity merge")
    p.add_argument("--tsg", required=True, help="text scene graph JSON")
    p.add_argument("--vsg", required=True, help="visual scene graph JSON")
    p.add_argument("--threshold", type=float,
                   help="cosine threshold for --type 3")
    p.add_argument("--vectors", help="word-vector table for --type 3 "
                                     "(default: bundled)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_cmsg_build)

    p = sub.add_parser("node2vec", help="structural embeddings for a graph")
    p.add_argument("--graph", required=True, help="scene graph JSON")
    p.add_argument("--out", required=True, help="output checkpoint file")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--walk-length", type=int, default=20)
    p.add_argument("--walks-per-node", type=int, default=10)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_node2vec)

    p = sub.add_parser("gradcheck",
                       help="finite-difference gradient verification")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=GRADCHECK_TOL)
    p.add_argument("--max-entries", type=int, default=128,
                   help="checked entries per tensor (0 = all)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "max_entries", None) == 0:
        args.max_entries = None
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SgmmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
