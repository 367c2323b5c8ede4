"""ftadapter command line: validate, train, predict."""

from __future__ import annotations

import argparse
import sys

from ftadapter import AdapterError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftadapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", help="check a dataset against the record schema")
    validate.add_argument("--dataset", required=True)

    train = sub.add_parser("train", help="launch the external trainer")
    train.add_argument("--dataset", required=True)
    train.add_argument("--base-model", required=True)
    train.add_argument("--epochs", type=int, required=True)
    train.add_argument("--lr", type=float, required=True)
    train.add_argument("--adapter-rank", type=int, required=True)
    train.add_argument("--output-dir", required=True)
    train.add_argument(
        "--trainer-cmd",
        required=True,
        help="command template; {config}, {dataset} and {output_dir} are substituted",
    )

    predict = sub.add_parser("predict", help="batched bracket-constrained inference")
    predict.add_argument("--model-dir", required=True)
    predict.add_argument("--prompts", required=True)
    predict.add_argument("--out", required=True)
    predict.add_argument("--max-new-tokens", type=int, default=32)
    predict.add_argument("--no-mask", action="store_true", help="stop-sequence mode only")

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "validate":
            from ftadapter.dataset import validate_dataset

            count = validate_dataset(args.dataset)
            print(f"ok: {count} records")
        elif args.command == "train":
            from ftadapter.train import TrainJobSpec, launch_train

            model_dir = launch_train(
                TrainJobSpec(
                    dataset_path=args.dataset,
                    base_model=args.base_model,
                    epochs=args.epochs,
                    learning_rate=args.lr,
                    adapter_rank=args.adapter_rank,
                    output_dir=args.output_dir,
                    trainer_cmd=args.trainer_cmd,
                )
            )
            print(f"trained model at {model_dir}")
        else:
            from ftadapter.predict import predict

            count = predict(args.model_dir, args.prompts, args.out, use_mask=not args.no_mask, max_new_tokens=args.max_new_tokens)
            print(f"wrote {count} predictions to {args.out}")
        return 0
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
