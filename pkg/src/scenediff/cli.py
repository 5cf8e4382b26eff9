"""Command-line entry points.

Subcommands: gen-data, train, eval, synth, edit, verify, ablate, serve.
Exit codes: 0 success, 1 usage error, 2 runtime failure.

The --config file is flat key = value text (# comments allowed); keys are the
hyperparameter names (n_points, t_steps, schedule, heads, attention_layers,
d_text, d_v, d_f, d_time, learning_rate, batch_size, context_points) plus
epochs and ablation.  Unknown keys fail.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import synthdata as sd
from .gpnet import GuidingPointsModel, HyperParams, MODES


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_HP_KEYS = set(asdict(HyperParams()).keys())
_EXTRA_KEYS = {"epochs", "ablation"}


def parse_config(path) -> dict:
    """Flat key = value config file; values are int/float/str by inspection."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _HP_KEYS | _EXTRA_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if key in ("schedule", "ablation"):
            out[key] = value
        elif key == "learning_rate":
            out[key] = float(value)
        else:
            try:
                out[key] = int(value)
            except ValueError:
                out[key] = float(value)
    return out


def _hyperparams(args) -> "HyperParams":
    base = HyperParams() if getattr(args, "full_scale", False) else HyperParams.desk()
    overrides = {}
    if getattr(args, "config", None):
        overrides = parse_config(args.config)
    hp_over = {k: v for k, v in overrides.items() if k in _HP_KEYS}
    return replace(base, **hp_over), overrides


def build_parser() -> _Parser:
    p = _Parser(prog="scenediff", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    g = sub.add_parser("gen-data", help="generate a synthetic interaction dataset")
    g.add_argument("--seed", type=int, default=0, help="first seed (seeds run seed..seed+count-1)")
    g.add_argument("--count", type=int, default=200)
    g.add_argument("--out", required=True)
    g.add_argument("--n-points", type=int, default=256)
    g.add_argument("--max-objects", type=int, default=3)

    t = sub.add_parser("train", help="train a model on a dataset file")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="checkpoint directory")
    t.add_argument("--config", help="flat key=value config file")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--ablation", choices=MODES, default=None)
    t.add_argument("--full-scale", action="store_true",
                   help="start from the full-scale hyperparameters")
    t.add_argument("--quiet", action="store_true")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset file")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report", required=True, help="output JSONL report path")
    e.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("synth", help="synthesize a target for one scene + prompt")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--scene", required=True, help="dataset file")
    s.add_argument("--index", type=int, default=0, help="interaction index in the file")
    s.add_argument("--prompt", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="write the cloud as JSON (default: stdout summary)")

    d = sub.add_parser("edit", help="run an editing operation on one scene")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--scene", required=True)
    d.add_argument("--index", type=int, default=0)
    d.add_argument("--op", required=True, choices=["replace", "alter_shape", "displace"])
    d.add_argument("--prompt", required=True)
    d.add_argument("--target-id", required=True)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out")

    v = sub.add_parser("verify", help="run the theory verification suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--json", action="store_true", help="emit the full JSON report")
    v.add_argument("--out", help="write the JSON report to a file")

    a = sub.add_parser("ablate", help="train/evaluate the ablation matrix")
    a.add_argument("--out", required=True, help="output directory (csv + md)")
    a.add_argument("--config", help="flat key=value config file")
    a.add_argument("--epochs", type=int, default=60)
    a.add_argument("--train-count", type=int, default=60)
    a.add_argument("--test-count", type=int, default=10)
    a.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("serve", help="serve the HTTP API (and the UI if built)")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--host", default="127.0.0.1")
    r.add_argument("--port", type=int, default=8787)
    r.add_argument("--frontend", help="directory of built UI assets to serve")
    return p


def _load_model(path) -> GuidingPointsModel:
    try:
        return GuidingPointsModel.load(path)
    except FileNotFoundError as e:
        raise RuntimeError(f"checkpoint not loadable: {e}") from e


def _load_scene(args):
    data = sd.load_dataset(args.scene)
    if not 0 <= args.index < len(data):
        raise RuntimeError(f"scene index {args.index} out of range "
                           f"(file has {len(data)} interactions)")
    return data[args.index]


def _cmd_gen_data(args):
    cfg = sd.GenConfig(n_points=args.n_points, max_objects=args.max_objects)
    data = sd.generate_dataset(range(args.seed, args.seed + args.count), cfg)
    sd.save_dataset(data, args.out)
    print(f"wrote {len(data)} interactions to {args.out}")
    return 0


def _cmd_train(args):
    from .training import TrainConfig, train
    hp, overrides = _hyperparams(args)
    epochs = args.epochs or overrides.get("epochs", 200)
    ablation = args.ablation or overrides.get("ablation", "full")
    data = sd.load_dataset(args.data)
    cfg = TrainConfig(hyperparams=hp, epochs=epochs, seed=args.seed,
                      ablation=ablation)
    hook = None if args.quiet else (
        lambda e: print(f"epoch {e['epoch']:4d}  loss {e['loss']:.6f}"))
    _, log = train(data, cfg, out_dir=args.out, log_hook=hook)
    print(f"final loss {log.losses[-1]:.6f}; checkpoint at {args.out}")
    return 0


def _cmd_eval(args):
    from .training import evaluate_model, save_eval_report
    model = _load_model(args.checkpoint)
    data = sd.load_dataset(args.data)
    agg, records = evaluate_model(model, data, eval_seed=args.seed)
    save_eval_report(agg, records, args.report)
    print(json.dumps(agg.to_dict(), indent=2))
    return 0


def _cmd_synth(args):
    from .diffusion import make_schedule, p_sample_loop
    from .metrics import from_frame
    from .training import PreparedSample
    model = _load_model(args.checkpoint)
    itx = _load_scene(args)
    s = PreparedSample.from_interaction(itx)
    schedule = make_schedule(model.hp.schedule, model.hp.t_steps)
    den = model.denoiser(s.entities, args.prompt)
    out = p_sample_loop(den, None, schedule, model.hp.n_points, seed=(args.seed, 77))
    world = from_frame(out, s.center, s.scale)
    gp = model.guiding_points(s.entities, args.prompt)
    payload = {"points": world.reshape(-1).tolist(), "seed": args.seed,
               "attention_weights": [] if gp is None else [float(v) for v in gp.w]}
    if args.out:
        Path(args.out).write_text(json.dumps(payload))
        print(f"wrote {len(world)} points to {args.out}")
    else:
        print(json.dumps({**payload, "points": f"<{len(world)} points>"}, indent=2))
    return 0


def _cmd_edit(args):
    from .editing import EditRequest, edit
    model = _load_model(args.checkpoint)
    itx = _load_scene(args)
    request = EditRequest(itx.id, args.op, args.prompt, args.target_id)
    result = edit(itx, request, model, seed=args.seed)
    payload = {"points": result.points.reshape(-1).tolist(), "seed": args.seed,
               "op": args.op}
    if args.out:
        Path(args.out).write_text(json.dumps(payload))
        print(f"wrote {len(result.points)} points to {args.out}")
    else:
        print(json.dumps({**payload, "points": f"<{len(result.points)} points>"},
                         indent=2))
    return 0


def _cmd_verify(args):
    from .theory import run_verification
    report = run_verification(seed=args.seed)
    for check in report["checks"]:
        mark = "PASS" if check["passed"] else "FAIL"
        print(f"[{mark}] {check['name']}")
    for note in report["notes"]:
        print(f"note: {note}")
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2))
    if args.json:
        print(json.dumps(report, indent=2))
    return 0 if report["passed"] else 2


def _cmd_ablate(args):
    from .training import (TrainConfig, matrix_to_csv, matrix_to_markdown,
                           run_ablation_matrix)
    hp, overrides = _hyperparams(args)
    epochs = args.epochs or overrides.get("epochs", 60)
    gen_cfg = sd.GenConfig(n_points=hp.n_points, max_objects=2)
    base = TrainConfig(hyperparams=hp, epochs=epochs, seed=args.seed)
    rows = run_ablation_matrix(
        list(range(args.seed, args.seed + args.train_count)),
        list(range(10000 + args.seed, 10000 + args.seed + args.test_count)),
        base, gen_cfg,
        log_hook=lambda r: print(f"{r['label']:24s} cd={r['cd']:.4f} "
                                 f"emd={r['emd']:.4f} f1={r['f1']:.4f}"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablations.md").write_text(matrix_to_markdown(rows))
    (out / "ablations.csv").write_text(matrix_to_csv(rows))
    print(f"wrote {out / 'ablations.md'} and {out / 'ablations.csv'}")
    return 0


def _cmd_serve(args):
    from .service import SceneService, make_server
    model = _load_model(args.checkpoint)
    service = SceneService(model, checkpoint_dir=args.checkpoint)
    server = make_server(service, args.host, args.port, frontend_dir=args.frontend)
    print(f"serving on http://{args.host}:{args.port} "
          f"(checkpoint {service.checkpoint})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "edit": _cmd_edit,
    "verify": _cmd_verify,
    "ablate": _cmd_ablate,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if not args.command:
        parser.print_help()
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (RuntimeError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
