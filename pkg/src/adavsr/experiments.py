"""Evaluation across noise conditions and the ablation runner.

CSV outputs are fully determined by config + seed (fixed float
formatting, no timestamps); wall-clock timings go to the JSON sidecars
so reruns stay byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time

import numpy as np

from .config import ExperimentConfig
from .data import CorpusSpec, RawSample, add_noise_snr, generate_corpus, ids_to_text
from .errors import InputError
from .frontend import stft_logmel
from .metrics import ReportRow, cer, wer
from .model import AvsrModel
from .training import TrainReport, train

__all__ = [
    "evaluate",
    "write_report_csv",
    "dump_masks",
    "ABLATION_VARIANTS",
    "variant_config",
    "run_ablation",
]


def _noise_seed(base: int, condition: int, index: int) -> int:
    return int(np.random.SeedSequence([base, condition, index]).generate_state(1)[0])


def evaluate(
    model: AvsrModel,
    samples: list[RawSample],
    snrs: list[float],
    seed: int = 0,
) -> list[ReportRow]:
    """Score a model on clean audio plus each SNR condition.

    Returns len(snrs) + 2 rows: clean first, one per SNR, then the
    arithmetic mean over all scored conditions.  Video is never
    corrupted; noisy audio gets its spectrogram recomputed so both
    audio streams see the same degraded signal.
    """
    if not samples:
        raise InputError("evaluation set is empty")
    cfg = model.config
    refs = [ids_to_text(s.transcript) for s in samples]
    rows: list[ReportRow] = []
    conditions: list[tuple[str, float | None]] = [("clean", None)]
    conditions += [(_fmt_snr(s), float(s)) for s in snrs]
    for ci, (name, snr) in enumerate(conditions):
        hyps = []
        for si, smp in enumerate(samples):
            if snr is None:
                wave, logmel = smp.waveform, smp.logmel
            else:
                wave = add_noise_snr(smp.waveform, snr, _noise_seed(seed, ci, si))
                logmel = stft_logmel(wave, n_fft=cfg.n_fft, hop=cfg.hop, n_mels=cfg.n_mels)
            hyps.append(ids_to_text(model.transcribe(smp.frames, wave, logmel)))
        rows.append(ReportRow(name, wer(hyps, refs), cer(hyps, refs)))
    rows.append(
        ReportRow(
            "avg",
            float(np.mean([r.wer for r in rows])),
            float(np.mean([r.cer for r in rows])),
        )
    )
    return rows


def _fmt_snr(snr: float) -> str:
    return f"{snr:g}dB"


def write_report_csv(path: str, rows: list[ReportRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("condition,wer,cer\n")
        for row in rows:
            fh.write(row.as_csv() + "\n")


def dump_masks(model: AvsrModel, samples: list[RawSample], out_dir: str) -> None:
    """Write each sample's noise-suppression mask as a (T1, D1) CSV."""
    if model.cmnsm is None:
        raise InputError("this model has no mask module to inspect")
    os.makedirs(out_dir, exist_ok=True)
    from .tensor import no_grad

    was_training = model.training
    model.eval()
    try:
        with no_grad():
            for i, smp in enumerate(samples):
                f_v, streams = model._streams(smp.frames, smp.waveform, smp.logmel)
                _, mask = model.cmnsm(streams[model.audio_src], f_v, return_mask=True)
                np.savetxt(
                    os.path.join(out_dir, f"mask_{i:04d}.csv"),
                    mask.data,
                    delimiter=",",
                    fmt="%.8f",
                )
    finally:
        if was_training:
            model.train()


# -- ablation ---------------------------------------------------------------

# (name, use_avrm, use_cmnsm, use_tbsm, encoding); the dual_wiring row is
# the full system itself, so it reuses the full row's training run.
ABLATION_VARIANTS: list[tuple[str, bool, bool, bool, str]] = [
    ("baseline", False, False, False, "dual"),
    ("regions_only", True, False, False, "dual"),
    ("masking_only", False, True, False, "dual"),
    ("selection_only", False, False, True, "dual"),
    ("full", True, True, True, "dual"),
    ("wire_time_both", True, True, True, "time_only"),
    ("wire_freq_both", True, True, True, "freq_only"),
]

SINGLE_MODULE_VARIANTS = ("regions_only", "masking_only", "selection_only")


def variant_config(base: ExperimentConfig, name: str, seed: int) -> ExperimentConfig:
    for vname, avrm, cmnsm, tbsm, encoding in ABLATION_VARIANTS:
        if vname == name:
            return dataclasses.replace(
                base,
                use_avrm=avrm,
                use_cmnsm=cmnsm,
                use_tbsm=tbsm,
                encoding=encoding,
                seed=seed,
            )
    raise InputError(f"unknown ablation variant {name!r}")


def run_ablation(
    base: ExperimentConfig,
    out_dir: str,
    n_seeds: int = 3,
    eval_snr: float = -5.0,
    corpus_template: CorpusSpec | None = None,
) -> dict:
    """Train and score every ablation variant across seeds.

    The corpus has base.n_train + base.n_eval samples per seed; models
    are scored on the held-out slice at the single test SNR.  A corpus
    template can pin generation details (word counts, tone levels); its
    sample count and seed are overridden per ablation seed.  Writes
    ablation_runs.csv (per seed), ablation_summary.csv (seed means),
    and ablation.json (summary plus wall-clock).
    """
    base.validate()
    os.makedirs(out_dir, exist_ok=True)
    t_start = time.perf_counter()
    template = corpus_template or CorpusSpec(
        t0=base.t0,
        h0=base.h0,
        w0=base.w0,
        n_fft=base.n_fft,
        hop=base.hop,
        n_mels=base.n_mels,
    )
    runs: list[dict] = []
    for s in range(n_seeds):
        seed = base.seed + s
        corpus_spec = dataclasses.replace(
            template,
            n_samples=base.n_train + base.n_eval,
            seed=10_000 + seed,
        )
        corpus = generate_corpus(corpus_spec)
        train_set, eval_set = corpus[: base.n_train], corpus[base.n_train :]
        for name, *_ in ABLATION_VARIANTS:
            cfg = variant_config(base, name, seed)
            model, report = train(cfg, train_set)
            rows = evaluate(model, eval_set, [eval_snr], seed=seed)
            snr_row = rows[1]
            runs.append(
                {
                    "variant": name,
                    "seed": seed,
                    "wer": snr_row.wer,
                    "cer": snr_row.cer,
                    "parameters": model.num_parameters(),
                    "wall_seconds": report.wall_seconds,
                }
            )

    # the dual-wiring row is the full system under another name
    for run in [r for r in runs if r["variant"] == "full"]:
        alias = dict(run)
        alias["variant"] = "wire_dual"
        runs.append(alias)

    summary: dict[str, dict] = {}
    order = [name for name, *_ in ABLATION_VARIANTS] + ["wire_dual"]
    for name in order:
        rs = [r for r in runs if r["variant"] == name]
        summary[name] = {
            "wer": float(np.mean([r["wer"] for r in rs])),
            "cer": float(np.mean([r["cer"] for r in rs])),
            "parameters": rs[0]["parameters"],
        }

    with open(os.path.join(out_dir, "ablation_runs.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("variant,seed,wer,cer,parameters\n")
        for r in runs:
            fh.write(f"{r['variant']},{r['seed']},{r['wer']:.6f},{r['cer']:.6f},{r['parameters']}\n")
    with open(
        os.path.join(out_dir, "ablation_summary.csv"), "w", encoding="utf-8", newline="\n"
    ) as fh:
        fh.write("variant,wer,cer,parameters\n")
        for name in order:
            s = summary[name]
            fh.write(f"{name},{s['wer']:.6f},{s['cer']:.6f},{s['parameters']}\n")
    payload = {
        "summary": summary,
        "runs": runs,
        "wall_seconds": time.perf_counter() - t_start,
    }
    with open(os.path.join(out_dir, "ablation.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return payload
