"""Sidecar command line: serve a model, or generate an adversarial tree."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from .fgsm import generate_fgsm
from .models import ModelSpecError, load_model_spec
from .server import serve_stdio, serve_tcp


def _parse_epsilon(text: str) -> float:
    # accepts "4/255" as well as plain floats
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad epsilon {text!r}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqshort-sidecar",
        description="Serve a pre-trained classifier over the binary inference "
                    "protocol, or generate sign-gradient adversarial image trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="answer inference requests")
    p_serve.add_argument("--model", required=True, help="model spec JSON")
    group = p_serve.add_mutually_exclusive_group(required=True)
    group.add_argument("--listen", help="host:port (port 0 picks a free one)")
    group.add_argument("--stdio", action="store_true",
                       help="serve a single session over stdin/stdout")

    p_fgsm = sub.add_parser("fgsm", help="write an adversarial copy of a dataset")
    p_fgsm.add_argument("--model", required=True, help="model spec JSON")
    p_fgsm.add_argument("--dataset", required=True, help="folder-per-class tree")
    p_fgsm.add_argument("--out", required=True)
    p_fgsm.add_argument("--epsilon", type=_parse_epsilon, default=4 / 255,
                        help="L-inf budget in raw pixel space (default 4/255)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        model = load_model_spec(args.model)
    except ModelSpecError as exc:
        print(f"model spec error: {exc}", file=sys.stderr)
        return 2

    if args.command == "serve":
        if args.stdio:
            serve_stdio(model)
            return 0
        host, _, port = args.listen.rpartition(":")
        if not host or not port.isdigit():
            print(f"--listen must be host:port, got {args.listen!r}", file=sys.stderr)
            return 2

        def announce(addr):
            print(f"listening on {addr[0]}:{addr[1]}", file=sys.stderr, flush=True)

        serve_tcp(model, host, int(port), ready_callback=announce)
        return 0

    try:
        written = generate_fgsm(model, args.dataset, args.out, epsilon=args.epsilon)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {written} adversarial images to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
