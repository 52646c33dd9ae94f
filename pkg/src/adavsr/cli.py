"""Command-line interface: gen / train / eval / ablate.

Exit codes: 0 on success, 1 on input or configuration problems, 2 on
numeric failures (divergence, non-finite values, infeasible targets).
The ADAVSR_SEED environment variable overrides every configured seed.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ExperimentConfig
from .data import CorpusSpec, generate_corpus, read_corpus, write_corpus
from .errors import AdavsrError, InputError, NumericError
from .experiments import dump_masks, evaluate, run_ablation, write_report_csv
from .training import load_checkpoint, train

__all__ = ["main", "parse_snr_list"]


def parse_snr_list(text: str) -> list[float]:
    """Parse `-5,0,5,10,clean` into numeric SNRs; the clean condition is
    always evaluated, so a `clean` token only states the default."""
    snrs: list[float] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if token.lower() == "clean":
            continue
        try:
            snrs.append(float(token))
        except ValueError:
            raise InputError(f"bad SNR value {token!r} (expected a number or 'clean')") from None
    return snrs


def _env_seed() -> int | None:
    raw = os.environ.get("ADAVSR_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"ADAVSR_SEED must be an integer, got {raw!r}") from None


def _read_kv_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _load_corpus_spec(path: str) -> CorpusSpec:
    raw = _read_kv_file(path)
    valid = {f.name for f in CorpusSpec.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    unknown = set(raw) - valid
    if unknown:
        raise InputError(f"unknown corpus spec keys: {sorted(unknown)}")
    try:
        return CorpusSpec(**{k: int(v) for k, v in raw.items()})
    except ValueError as e:
        raise InputError(f"corpus spec values must be integers: {e}") from None


def _cmd_gen(args) -> int:
    spec = _load_corpus_spec(args.spec)
    seed = _env_seed()
    if seed is not None:
        spec.seed = seed
    samples = generate_corpus(spec)
    write_corpus(args.out, samples, spec)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    seed = _env_seed()
    if seed is not None:
        config.seed = seed
    samples, _ = read_corpus(args.data)
    model, report = train(config, samples, out_dir=args.out)
    final = report.epoch_losses[-1] if report.epoch_losses else float("nan")
    print(
        f"trained {model.num_parameters()} parameters for {report.steps} steps; "
        f"final epoch loss {final:.4f}; checkpoint in {args.out}"
    )
    return 0


def _cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    samples, _ = read_corpus(args.data)
    seed = _env_seed()
    rows = evaluate(model, samples, parse_snr_list(args.snr), seed=0 if seed is None else seed)
    write_report_csv(args.report, rows)
    if args.dump_masks:
        dump_masks(model, samples, args.dump_masks)
    for row in rows:
        print(f"{row.condition}: wer {row.wer:.2f} cer {row.cer:.2f}")
    return 0


def _cmd_ablate(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    seed = _env_seed()
    if seed is not None:
        config.seed = seed
    payload = run_ablation(config, args.out, n_seeds=args.seeds)
    for name, s in payload["summary"].items():
        print(f"{name}: wer {s['wer']:.2f} cer {s['cer']:.2f} params {s['parameters']}")
    print(f"reports written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adavsr",
        description="Audio-visual speech recognition with cross-modal enhancement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic corpus container")
    p_gen.add_argument("--spec", required=True, help="corpus spec file (key=value)")
    p_gen.add_argument("--out", required=True, help="output container path")
    p_gen.set_defaults(fn=_cmd_gen)

    p_train = sub.add_parser("train", help="train a model on a corpus")
    p_train.add_argument("--config", required=True, help="experiment config file")
    p_train.add_argument("--data", required=True, help="corpus container")
    p_train.add_argument("--out", required=True, help="checkpoint directory")
    p_train.set_defaults(fn=_cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint across noise conditions")
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p_eval.add_argument("--data", required=True, help="corpus container")
    p_eval.add_argument("--snr", default="-5,0,5,10,clean", help="comma list of SNRs")
    p_eval.add_argument("--report", required=True, help="output CSV path")
    p_eval.add_argument("--dump-masks", default=None, help="directory for per-sample mask CSVs")
    p_eval.set_defaults(fn=_cmd_eval)

    p_abl = sub.add_parser("ablate", help="run the module/wiring ablation grid")
    p_abl.add_argument("--config", required=True, help="experiment config file")
    p_abl.add_argument("--out", required=True, help="output directory")
    p_abl.add_argument("--seeds", type=int, default=3, help="number of seeds")
    p_abl.set_defaults(fn=_cmd_ablate)
    return parser


def _join_snr_value(argv: list[str]) -> list[str]:
    """Fold `--snr -5,0,...` into `--snr=-5,0,...` so argparse does not
    mistake a leading negative SNR for an option flag."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--snr" and i + 1 < len(argv):
            out.append(f"--snr={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_snr_value(sys.argv[1:] if argv is None else list(argv)))
    try:
        return args.fn(args)
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 2
    except (AdavsrError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
