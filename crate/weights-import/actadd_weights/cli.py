import argparse
import json
import sys

from .convert import ConversionError, convert, convert_check


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="actadd-weights", description="GPT-2 checkpoint conversion to AAWF")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", help="convert a checkpoint directory or file")
    c.add_argument("src")
    c.add_argument("dst")
    c.add_argument("--model-name", default="gpt2", help="gpt2, gpt2-medium, gpt2-large, gpt2-xl or a custom label")

    k = sub.add_parser("check", help="verify checksums and probe values against the source")
    k.add_argument("aawf")
    k.add_argument("--source", help="checkpoint to probe against")
    k.add_argument("--probes", type=int, default=None, help="number of slices to compare (default 16 with --source, else 0)")
    k.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("golden", help="export reference logits from the source checkpoint")
    g.add_argument("src")
    g.add_argument("out")
    g.add_argument("--vocab", required=True)
    g.add_argument("--merges", required=True)
    g.add_argument("--prompt", action="append", dest="prompts", help="repeatable; defaults to five built-in prompts")
    g.add_argument("--model-name", default="gpt2")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "convert":
            report = convert(args.src, args.dst, args.model_name)
        elif args.command == "check":
            probes = args.probes if args.probes is not None else (16 if args.source else 0)
            if probes < 0:
                raise ConversionError("--probes must be >= 0")
            report = convert_check(args.aawf, probes, args.source, args.seed)
        else:
            from .golden import export_golden

            report = export_golden(
                args.src, args.out, vocab=args.vocab, merges=args.merges, prompts=args.prompts, model_name=args.model_name
            )
    except (ConversionError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(report, indent=2))
    for failure in report.get("failures", []):
        print(failure, file=sys.stderr)
    return 0 if report.get("ok", True) else 1
