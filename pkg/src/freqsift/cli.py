"""Command-line entry point.

Verbs: extract, matrix, compose, transplant, metrics, verify.
Exit codes: 0 ok, 2 input error, 3 search found nothing, 4 backend error.
Given the same config, seed and corpus, every artifact is byte-identical
across runs (manifests carry no timestamps).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .composition import compose_global, cross_label_transplant
from .config import (
    apply_overrides,
    budget_from,
    build_model,
    build_models,
    config_hash,
    load_config,
    load_corpus,
)
from .errors import (
    BackendError,
    DegenerateInputError,
    IncompatibleModelsError,
    InvalidInputError,
    InvalidParameterError,
    SearchNotFoundError,
    TooShortError,
    UndefinedEntropyError,
    UndefinedInverseError,
    UnsupportedConfigurationError,
)
from .metrics import levenshtein, levenshtein_ratio, psd, spectral_entropy, stoi
from .oracle import classify, top1
from .search import (
    find_complete,
    find_sufficient,
    inverse_signal,
    mask_from_json,
    mask_to_json,
    verify_sufficient,
)
from .signal import reconstruct
from .transfer import transfer_matrix
from .wavio import read_wav, write_wav

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_FOUND = 3
EXIT_BACKEND = 4


def _dump_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _manifest(command: str, cfg: dict, extra: dict | None = None) -> dict:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config_hash": config_hash(cfg),
        "delta": cfg["delta"],
        "epsilon": cfg["epsilon"],
        "n_fft": cfg["n_fft"],
        "granularity": cfg["granularity"],
        "seed": cfg["seed"],
        "budget": cfg["budget"],
    }
    if extra:
        manifest.update(extra)
    return manifest


def _resolve_oracle(cfg: dict, spec: str):
    """--oracle takes a model id from the config or an inline
    stdio:/tcp: endpoint."""
    if spec.startswith(("stdio:", "tcp:")):
        return build_model({"id": "adhoc", "type": "external", "endpoint": spec})
    registry = build_models(cfg)
    if spec not in registry:
        raise InvalidInputError(
            f"oracle {spec!r} not in config (have: {sorted(registry)})"
        )
    return registry[spec]


def _search_kwargs(cfg: dict) -> dict:
    return {
        "budget": budget_from(cfg),
        "n_fft": cfg["n_fft"] or None,
        "granularity": cfg["granularity"] or None,
    }


def cmd_extract(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    oracle = _resolve_oracle(cfg, args.oracle)
    signal = read_wav(args.input)
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    kwargs = _search_kwargs(cfg)

    suff = find_sufficient(oracle, signal, cfg["delta"], **kwargs)
    comp = find_complete(oracle, signal, cfg["delta"], **kwargs)

    write_wav(os.path.join(out, "sufficient.wav"), reconstruct(signal, suff.mask, n_fft=suff.n_fft))
    write_wav(os.path.join(out, "complete.wav"), reconstruct(signal, comp.mask, n_fft=comp.n_fft))
    if comp.inverse_defined:
        write_wav(os.path.join(out, "inverse.wav"), inverse_signal(signal, comp))
    _dump_json(os.path.join(out, "sufficient_mask.json"), mask_to_json(suff.mask))
    _dump_json(os.path.join(out, "complete_mask.json"), mask_to_json(comp.mask))
    _dump_json(
        os.path.join(out, "result.json"),
        {
            "manifest": _manifest("extract", cfg, {"input": os.path.basename(args.input), "oracle": oracle.id}),
            "sufficient": {
                "target_class": suff.target_class,
                "target_label": oracle.labels[suff.target_class],
                "original_confidence": suff.original_confidence,
                "achieved_confidence": suff.achieved_confidence,
                "kept_bins": suff.mask.popcount(),
                "total_bins": len(suff.mask),
                "one_minimal": suff.one_minimal,
                "oracle_queries": suff.oracle_queries,
                "n_fft": suff.n_fft,
                "granularity": suff.granularity,
            },
            "complete": {
                "target_class": comp.target_class,
                "achieved_confidence": comp.achieved_confidence,
                "kept_bins": comp.mask.popcount(),
                "total_bins": len(comp.mask),
                "inverse_defined": comp.inverse_defined,
                "inverse_class": comp.inverse_class,
                "one_minimal": comp.one_minimal,
                "oracle_queries": comp.oracle_queries,
            },
        },
    )
    print(f"extract: wrote sufficient ({suff.mask.popcount()}/{len(suff.mask)} bins), "
          f"complete ({comp.mask.popcount()} bins) to {out}")
    return EXIT_OK


def _matrix_csv(path: str, matrix) -> None:
    ids = matrix.model_ids
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("source," + ",".join(ids) + ",avg\n")
        for i, src in enumerate(ids):
            cells = []
            for j in range(len(ids)):
                if i == j:
                    cells.append("--")
                elif np.isnan(matrix.cells[i, j]):
                    cells.append("")
                else:
                    cells.append(f"{matrix.cells[i, j]:.6f}")
            avg = "" if np.isnan(matrix.row_avg[i]) else f"{matrix.row_avg[i]:.6f}"
            fh.write(f"{src}," + ",".join(cells) + f",{avg}\n")


def cmd_matrix(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    registry = build_models(cfg)
    if len(registry) < 2:
        raise InvalidInputError("matrix needs at least 2 models in the config")
    corpus = load_corpus(cfg)
    if not corpus:
        raise InvalidInputError("matrix needs a non-empty corpus")
    models = [registry[k] for k in sorted(registry)]
    matrix, records = transfer_matrix(
        models,
        corpus,
        cfg["delta"],
        cfg["epsilon"],
        subset_kind=args.subset,
        workers=int(cfg["workers"]),
        **_search_kwargs(cfg),
    )
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    _matrix_csv(os.path.join(out, "matrix_alpha.csv"), matrix)
    _dump_json(
        os.path.join(out, "matrix.json"),
        {
            "manifest": _manifest("matrix", cfg, {"subset_kind": args.subset}),
            "model_ids": list(matrix.model_ids),
            "cells": [
                [None if np.isnan(v) else v for v in row] for row in matrix.cells.tolist()
            ],
            "counts": matrix.counts.tolist(),
            "row_avg": [None if np.isnan(v) else v for v in matrix.row_avg.tolist()],
            "excluded": list(matrix.excluded),
        },
    )
    with open(os.path.join(out, "verdicts.jsonl"), "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"matrix: {len(matrix.model_ids)} models x {len(corpus)} signals -> {out}")
    return EXIT_OK


def cmd_compose(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    oracle = _resolve_oracle(cfg, args.oracle)
    corpus = load_corpus(cfg)
    if not corpus:
        raise InvalidInputError("compose needs a non-empty corpus")
    if args.class_label in oracle.labels:
        class_index = oracle.labels.index(args.class_label)
    else:
        try:
            class_index = int(args.class_label)
        except ValueError:
            raise InvalidInputError(
                f"--class {args.class_label!r} is neither a label of {oracle.id} nor an index"
            )
    kwargs = _search_kwargs(cfg)

    candidates: list[tuple[str, object]] = []
    skipped = 0
    for sig_id, sig in corpus:
        if top1(classify(oracle, sig)) != class_index:
            skipped += 1
            continue
        if args.use_raw:
            candidates.append((sig_id, sig))
        else:
            try:
                result = find_sufficient(oracle, sig, cfg["delta"], **kwargs)
            except (DegenerateInputError, SearchNotFoundError):
                skipped += 1
                continue
            candidates.append((sig_id, reconstruct(sig, result.mask, n_fft=result.n_fft)))
    if not candidates:
        raise SearchNotFoundError(
            f"no corpus signal classifies to class {class_index} on {oracle.id}"
        )

    composite = compose_global(
        oracle,
        [sig for _, sig in candidates],
        class_index,
        ids=[sig_id for sig_id, _ in candidates],
    )
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    write_wav(os.path.join(out, "composite.wav"), composite.signal)
    _dump_json(
        os.path.join(out, "composite.json"),
        {
            "manifest": _manifest(
                "compose", cfg, {"oracle": oracle.id, "use_raw": bool(args.use_raw)}
            ),
            "class_index": composite.class_index,
            "class_label": oracle.labels[composite.class_index],
            "member_ids": list(composite.member_ids),
            "candidates_considered": composite.candidates_considered,
            "corpus_skipped_other_class": skipped,
            "degree": composite.degree,
        },
    )
    print(
        f"compose: degree {composite.degree:.3f} "
        f"({len(composite.member_ids)}/{composite.candidates_considered} members) -> {out}"
    )
    return EXIT_OK


def cmd_transplant(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    oracle = _resolve_oracle(cfg, args.oracle)
    with open(args.composite_manifest, "r", encoding="utf-8") as fh:
        comp_meta = json.load(fh)
    composite_signal = read_wav(args.composite_wav)
    from .composition import CompositeSignature

    composite = CompositeSignature(
        signal=composite_signal,
        class_index=int(comp_meta["class_index"]),
        member_ids=tuple(comp_meta.get("member_ids", ())),
        candidates_considered=int(comp_meta.get("candidates_considered", 1)),
        degree=float(comp_meta.get("degree", 1.0)),
    )
    corpus = load_corpus(cfg)
    if not corpus:
        raise InvalidInputError("transplant needs a non-empty corpus of target signals")

    entries = []
    flips = 0
    eligible = 0
    for sig_id, sig in corpus:
        try:
            outcome = cross_label_transplant(oracle, composite, sig, mode=args.mode)
        except InvalidInputError as exc:
            entries.append({"signal": sig_id, "skipped": str(exc)})
            continue
        eligible += 1
        flips += outcome.flipped
        entries.append(
            {
                "signal": sig_id,
                "flipped": outcome.flipped,
                "predicted_class": top1(outcome.distribution),
                "confidence_in_composite_class": outcome.distribution.prob_of(
                    composite.class_index
                ),
            }
        )
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    _dump_json(
        os.path.join(out, "transplant.json"),
        {
            "manifest": _manifest(
                "transplant", cfg, {"oracle": oracle.id, "mode": args.mode}
            ),
            "composite_class": composite.class_index,
            "eligible_targets": eligible,
            "flips": flips,
            "flip_rate": (flips / eligible) if eligible else None,
            "entries": entries,
        },
    )
    rate = f"{flips}/{eligible}" if eligible else "n/a"
    print(f"transplant: flip rate {rate} -> {out}")
    return EXIT_OK


def _parse_pair(value: str) -> tuple[str, str]:
    left, sep, right = value.partition(":")
    if not sep:
        raise InvalidInputError(f"pair must be LEFT:RIGHT, got {value!r}")
    return left, right


def cmd_metrics(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    report: dict = {"manifest": _manifest("metrics", cfg), "stoi": [], "levenshtein": [], "signals": []}

    for value in args.pair or []:
        clean_path, degraded_path = _parse_pair(value)
        clean = read_wav(clean_path)
        degraded = read_wav(degraded_path)
        report["stoi"].append(
            {"clean": clean_path, "degraded": degraded_path, "stoi": stoi(clean, degraded)}
        )

    for value in args.transcript_pair or []:
        a_path, b_path = _parse_pair(value)
        with open(a_path, "r", encoding="utf-8") as fh:
            a = fh.read().strip()
        with open(b_path, "r", encoding="utf-8") as fh:
            b = fh.read().strip()
        report["levenshtein"].append(
            {
                "a": a_path,
                "b": b_path,
                "distance": levenshtein(a, b),
                "ratio_char": levenshtein_ratio(a, b, level="char"),
                "ratio_word": levenshtein_ratio(a, b, level="word"),
            }
        )

    for path in args.signal or []:
        sig = read_wav(path)
        estimate = psd(sig, method="welch" if len(sig) >= 512 else "periodogram")
        name = os.path.splitext(os.path.basename(path))[0]
        csv_path = os.path.join(out, f"psd_{name}.csv")
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("freq_hz,power\n")
            for f, p in zip(estimate.freqs_hz, estimate.power):
                fh.write(f"{f:.6f},{p:.12e}\n")
        try:
            entropy = spectral_entropy(sig, normalized=True)
        except UndefinedEntropyError:
            entropy = None
        report["signals"].append(
            {"signal": path, "normalized_spectral_entropy": entropy, "psd_csv": os.path.basename(csv_path)}
        )

    _dump_json(os.path.join(out, "metrics.json"), report)
    with open(os.path.join(out, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write("metric,left,right,value\n")
        for row in report["stoi"]:
            fh.write(f"stoi,{row['clean']},{row['degraded']},{row['stoi']:.6f}\n")
        for row in report["levenshtein"]:
            fh.write(f"levenshtein_distance,{row['a']},{row['b']},{row['distance']}\n")
            fh.write(f"levenshtein_ratio_char,{row['a']},{row['b']},{row['ratio_char']:.6f}\n")
            fh.write(f"levenshtein_ratio_word,{row['a']},{row['b']},{row['ratio_word']:.6f}\n")
        for row in report["signals"]:
            if row["normalized_spectral_entropy"] is not None:
                fh.write(
                    f"spectral_entropy_normalized,{row['signal']},,"
                    f"{row['normalized_spectral_entropy']:.6f}\n"
                )
    print(
        f"metrics: {len(report['stoi'])} stoi pairs, "
        f"{len(report['levenshtein'])} transcript pairs, "
        f"{len(report['signals'])} signals -> {out}"
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    oracle = _resolve_oracle(cfg, args.oracle)
    signal = read_wav(args.input)
    with open(args.mask, "r", encoding="utf-8") as fh:
        mask = mask_from_json(json.load(fh))
    n_fft = cfg["n_fft"] or None
    ok, dist = verify_sufficient(oracle, signal, mask, cfg["delta"], n_fft=n_fft)
    label = oracle.labels[top1(dist)]
    print(
        f"verify: {'SUFFICIENT' if ok else 'NOT sufficient'} "
        f"(masked top-1 {label!r}, confidence {dist.probs[top1(dist)]:.4f})"
    )
    return EXIT_OK if ok else EXIT_NOT_FOUND


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqsift",
        description="Minimal sufficient / complete frequency subsets of audio "
        "signals for black-box classifiers, and their transferability.",
    )
    parser.add_argument("--version", action="version", version=f"freqsift {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--delta", type=float, help="confidence retention gate in (0,1]")
        p.add_argument("--epsilon", type=float, help="entropy permissiveness in (0,1]")
        p.add_argument("--nfft", type=int, help="analysis FFT size (0 = signal length)")
        p.add_argument("--granularity", type=int, help="bins per search unit (0 = auto)")
        p.add_argument("--budget", type=int, help="max oracle queries per search")
        p.add_argument("--seed", type=int, help="run seed")
        p.add_argument("--workers", type=int, help="worker pool size for corpus commands")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("extract", help="extract sufficient/complete/inverse signals")
    p.add_argument("input", help="input WAV file")
    p.add_argument("--oracle", required=True, help="model id from config, or stdio:/tcp: endpoint")
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("matrix", help="cross-model transfer matrix over the corpus")
    p.add_argument("--subset", choices=("sufficient", "complete"), default="sufficient")
    common(p)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("compose", help="build a composite class signature")
    p.add_argument("--oracle", required=True)
    p.add_argument("--class", dest="class_label", required=True, help="class label or index")
    p.add_argument("--use-raw", action="store_true", help="compose raw signals, skip extraction")
    common(p)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("transplant", help="overlay a composite onto other-class signals")
    p.add_argument("--oracle", required=True)
    p.add_argument("--composite-wav", required=True)
    p.add_argument("--composite-manifest", required=True)
    p.add_argument("--mode", choices=("add", "replace"), default="add")
    common(p)
    p.set_defaults(func=cmd_transplant)

    p = sub.add_parser("metrics", help="PSD / entropy / STOI / Levenshtein reports")
    p.add_argument("--pair", action="append", help="clean.wav:degraded.wav (repeatable)")
    p.add_argument("--transcript-pair", action="append", help="a.txt:b.txt (repeatable)")
    p.add_argument("--signal", action="append", help="WAV for PSD + entropy (repeatable)")
    common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("verify", help="re-verify a saved mask against an oracle")
    p.add_argument("--mask", required=True, help="mask JSON artifact")
    p.add_argument("--input", required=True, help="original WAV")
    p.add_argument("--oracle", required=True)
    common(p)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (
        InvalidInputError,
        InvalidParameterError,
        IncompatibleModelsError,
        UnsupportedConfigurationError,
        TooShortError,
        UndefinedEntropyError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SearchNotFoundError, DegenerateInputError, UndefinedInverseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
