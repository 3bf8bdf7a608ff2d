"""Command-line entry points for training, evaluation, forecasting, serving."""

import argparse
import json
import os
import sys

from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    Rally,
    SERVE_TYPES,
    SHOT_TYPES,
    Stroke,
    generate_synthetic,
    parse_rallies,
    rallies_to_csv,
)
from .errors import RallycastError, ValidationError
from .model import ModelConfig, ModelParams, VARIANTS, teacher_forced_loss
from .rng import substream
from .service import ForecastService, RequestError, serve_forever
from .training import (
    TrainRun,
    ablation_sweep,
    evaluate,
    evaluate_seeds,
    format_ablation_table,
    train,
)

GRADCHECK_THRESHOLD = 1e-4


def _checkpoint_path(args, required=True):
    path = args.checkpoint or os.environ.get("RALLYCAST_CHECKPOINT")
    if required and not path:
        raise ValidationError(
            "no checkpoint path: pass --checkpoint or set RALLYCAST_CHECKPOINT"
        )
    return path


def _load_data(path):
    if not path:
        raise ValidationError("no dataset: pass --data PATH")
    return parse_rallies(path)


def _emit(obj):
    print(json.dumps(obj, sort_keys=True, separators=(",", ":")))


def cmd_train(args) -> int:
    rallies = _load_data(args.data)
    out_path = _checkpoint_path(args)
    run = TrainRun(seed=args.seed, epochs=args.epochs, batch_size=args.batch,
                   tau=args.tau, lr=args.lr,
                   config=ModelConfig.for_variant(args.variant))
    ckpt, history = train(rallies, run, log=_emit)
    save_checkpoint(ckpt, out_path)
    _emit({"checkpoint": out_path, "final_loss": history[-1], "epochs": len(history)})
    return 0


def cmd_evaluate(args) -> int:
    rallies = _load_data(args.data)
    ckpt = load_checkpoint(_checkpoint_path(args))
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        out = evaluate_seeds(ckpt, rallies, args.tau, args.samples, seeds)
        _emit(out)
    else:
        report = evaluate(ckpt, rallies, args.tau, args.samples, seed=args.seed)
        print(report.to_json())
    return 0


def _prefix_request(args, rallies):
    if args.rally:
        matches = [r for r in rallies if r.rally_id == args.rally]
        if not matches:
            raise ValidationError(f"no rally {args.rally!r} in {args.data}")
        rally = matches[0]
    else:
        rally = rallies[0]
    strokes = rally.strokes[: args.tau] if args.tau else rally.strokes
    return rally, {
        "playerA": rally.player_a,
        "playerB": rally.player_b,
        "prefix": [
            {"t": s.t, "locationA": list(s.loc_a), "locationB": list(s.loc_b),
             "shotType": s.shot_type}
            for s in strokes
        ],
        "horizon": args.horizon,
        "nSamples": args.samples,
        "seed": args.seed,
    }


def cmd_forecast(args) -> int:
    rallies = _load_data(args.data)
    service = ForecastService(load_checkpoint(_checkpoint_path(args)))
    _, request = _prefix_request(args, rallies)
    _emit(service.forecast(request))
    return 0


def cmd_whatif(args) -> int:
    rallies = _load_data(args.data)
    service = ForecastService(load_checkpoint(_checkpoint_path(args)))
    _, request = _prefix_request(args, rallies)
    prefix = request["prefix"]
    if not 1 <= args.stroke <= len(prefix):
        raise ValidationError(
            f"--stroke {args.stroke} outside the prefix (1..{len(prefix)})"
        )
    entry = prefix[args.stroke - 1]
    key = "locationA" if args.player == "a" else "locationB"
    if args.x is not None:
        entry[key][0] = args.x
    if args.y is not None:
        entry[key][1] = args.y
    if args.shot is not None:
        entry["shotType"] = args.shot
    _emit(service.forecast(request))
    return 0


def cmd_gen_synthetic(args) -> int:
    rallies = generate_synthetic(seed=args.seed, n_rallies=args.n)
    text = rallies_to_csv(rallies)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    if args.json:
        _emit({"written": args.out, "rallies": len(rallies)})
    else:
        print(f"wrote {len(rallies)} rallies to {args.out}")
    return 0


def make_gradcheck_rally(seed=23):
    """A fixed 4-stroke rally for end-to-end gradient verification.

    Strokes cluster inside a small patch of court so the untrained loss
    stays moderate: central differences at eps=1e-5 carry absolute noise
    proportional to the loss value, and a compact rally keeps that noise
    well below the smallest parameter gradient.
    """
    cycle = ["lob", "smash", "clear"]
    rng = substream(seed, "gradcheck-rally")
    strokes = []
    for t in range(1, 5):
        shot = "short service" if t == 1 else cycle[t - 2]
        la = (3.0 + float(rng.uniform(-0.8, 0.8)), 3.3 + float(rng.uniform(-0.8, 0.8)))
        lb = (3.0 + float(rng.uniform(-0.8, 0.8)), 10.0 + float(rng.uniform(-0.8, 0.8)))
        strokes.append(Stroke(t, la, lb, shot))
    return Rally("G1", "GM1", "Ann", "Bea", strokes)


def run_gradcheck(dims: int, eps: float = 1e-5):
    """Full-loss gradient check of every parameter at the given width."""
    from .data import Vocabulary

    vocab = Vocabulary(["Ann", "Bea"])
    config = ModelConfig(d_loc=dims, d_player=dims, d_embed=dims, dropout=0.0)
    params = ModelParams(config, vocab.n_players, seed=18)
    rally = make_gradcheck_rally()

    def f():
        loss, _ = teacher_forced_loss(params, vocab, rally, observed=2)
        return loss

    tensors = params.tensors()
    worst = T.grad_check(f, tensors, eps=eps)
    n_scalars = sum(t.data.size for t in tensors)
    return worst, n_scalars


def cmd_gradcheck(args) -> int:
    worst, n_scalars = run_gradcheck(args.dims)
    ok = bool(worst < GRADCHECK_THRESHOLD)
    if args.json:
        _emit({"maxRelErr": float(worst), "parameters": n_scalars,
               "threshold": GRADCHECK_THRESHOLD, "pass": ok})
    else:
        print(f"max relative error {worst:.3e} over {n_scalars} parameters "
              f"(threshold {GRADCHECK_THRESHOLD:g})")
    return 0 if ok else 1


def cmd_ablate(args) -> int:
    rallies = _load_data(args.data)
    variants = list(VARIANTS) if args.variant == "all" else [
        v.strip() for v in args.variant.split(",") if v.strip()
    ]
    result = ablation_sweep(rallies, variants, tau=args.tau, epochs=args.epochs,
                            batch_size=args.batch, lr=args.lr, seed=args.seed,
                            n_samples=args.samples)
    if args.json:
        _emit(result)
    else:
        print(format_ablation_table(result))
    return 0


def cmd_serve(args) -> int:
    service = ForecastService()
    path = _checkpoint_path(args, required=False)
    if path:
        service.load(path)
    else:
        print("warning: serving without a checkpoint; forecasts will return 503",
              file=sys.stderr)
    serve_forever(service, args.port, static_dir=args.static)
    return 0


def _add_common(p, *names):
    if "data" in names:
        p.add_argument("--data", help="CSV dataset path")
    if "checkpoint" in names:
        p.add_argument("--checkpoint", help="checkpoint path "
                       "(default: $RALLYCAST_CHECKPOINT)")
    if "tau" in names:
        p.add_argument("--tau", type=int, default=4, help="observed prefix length")
    if "seed" in names:
        p.add_argument("--seed", type=int, default=0)
    if "samples" in names:
        p.add_argument("--samples", type=int, default=10, help="rollouts per rally")
    if "json" in names:
        p.add_argument("--json", action="store_true", help="machine-readable output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rallycast",
        description="Rally movement and shot forecasting for badminton doubles of one: "
                    "train, evaluate, forecast, and serve player-movement models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model on a CSV dataset")
    _add_common(p, "data", "checkpoint", "tau", "seed")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--variant", default="full", choices=VARIANTS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a CSV dataset")
    _add_common(p, "data", "checkpoint", "tau", "seed", "samples")
    p.add_argument("--seeds", help="comma-separated seeds for a multi-seed average")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("forecast", help="forecast continuations of a rally prefix")
    _add_common(p, "data", "checkpoint", "seed", "samples")
    p.add_argument("--tau", type=int, default=0,
                   help="use only the first N strokes as the prefix (0 = all)")
    p.add_argument("--rally", help="rally id within --data (default: first rally)")
    p.add_argument("--horizon", type=int, default=3)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("whatif", help="forecast after editing one prefix stroke")
    _add_common(p, "data", "checkpoint", "seed", "samples")
    p.add_argument("--tau", type=int, default=0,
                   help="use only the first N strokes as the prefix (0 = all)")
    p.add_argument("--rally", help="rally id within --data (default: first rally)")
    p.add_argument("--horizon", type=int, default=3)
    p.add_argument("--stroke", type=int, required=True, help="stroke number to edit")
    p.add_argument("--player", choices=("a", "b"), default="b",
                   help="whose location to move")
    p.add_argument("--x", type=float, help="new x in court meters")
    p.add_argument("--y", type=float, help="new y in court meters")
    p.add_argument("--shot", choices=SHOT_TYPES, help="replace the stroke's shot type")
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("gen-synthetic", help="write a deterministic synthetic dataset")
    _add_common(p, "seed", "json")
    p.add_argument("--n", type=int, default=16, help="number of rallies")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("gradcheck", help="verify analytic gradients of the full loss")
    _add_common(p, "json")
    p.add_argument("--dims", type=int, default=4,
                   help="model width for the check; the fixed synthetic rally is "
                        "conditioned for width 4, other widths can show "
                        "finite-difference noise on near-zero gradients")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="train and evaluate model variants side by side")
    _add_common(p, "data", "tau", "seed", "samples", "json")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--variant", default="all",
                   help="comma-separated variant names, or 'all'")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("serve", help="run the HTTP forecast service")
    _add_common(p, "checkpoint")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", help="directory of UI files to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RallycastError, RequestError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
