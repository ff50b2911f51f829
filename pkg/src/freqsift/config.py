"""Experiment configuration: a documented JSON schema plus flag overrides.

Schema (all keys optional unless noted):

    {
      "models": [                     # required for oracle-driven commands
        {"id": "m1", "type": "band_energy",
         "sample_rate_hz": 8000,
         "band_edges_hz": [0, 1000, 2000, 4000],
         "temperature": 0.05,
         "labels": ["low", "mid", "high"]},
        {"id": "m2", "type": "template",
         "sample_rate_hz": 8000,
         "templates": [[...], [...]],        # or "template_wavs": [...]
         "n_fft": 1024,
         "temperature": 0.05,
         "labels": ["a", "b"]},
        {"id": "m3", "type": "external",
         "endpoint": "stdio:python -m some_adapter",   # or "tcp:host:port"
         "timeout_s": 30.0,
         "max_inflight": 32}
      ],
      "corpus": ["dir/or/file.wav", ...],
      "delta": 0.5,
      "epsilon": 0.9,
      "n_fft": 0,          # 0 = whole-signal FFT at the signal's length
      "granularity": 0,    # 0 = ceil(bins / 256) bins per search unit
      "budget": {"max_queries": 50000, "max_refine_depth": 32, "seed": 0},
      "seed": 0,
      "out_dir": "out",
      "workers": 1
    }

Command-line flags override file values; the hash of the fully resolved
configuration is stamped into every artifact manifest.
"""

from __future__ import annotations

import copy
import glob
import hashlib
import json
import os

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .oracle import BandEnergySpec, ClassifierHandle, TemplateSpec, build_registry
from .search import SearchBudget
from .signal import Signal, forward_fft
from .wavio import read_wav

__all__ = [
    "DEFAULT_CONFIG",
    "load_config",
    "apply_overrides",
    "config_hash",
    "build_models",
    "load_corpus",
    "budget_from",
]

DEFAULT_CONFIG: dict = {
    "models": [],
    "corpus": [],
    "delta": 0.5,
    "epsilon": 0.9,
    "n_fft": 0,
    "granularity": 0,
    "budget": {"max_queries": 50_000, "max_refine_depth": 32, "seed": 0},
    "seed": 0,
    "out_dir": "out",
    "workers": 1,
}


def load_config(path: str | None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is None:
        return cfg
    try:
        with open(path, "r", encoding="utf-8") as fh:
            user = json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise InvalidInputError(f"config {path} must be a JSON object")
    unknown = set(user) - set(DEFAULT_CONFIG)
    if unknown:
        raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
    for key, value in user.items():
        if key == "budget":
            cfg["budget"].update(value)
        else:
            cfg[key] = value
    return cfg


def apply_overrides(cfg: dict, args) -> dict:
    """Fold parsed CLI flags into the config; flags win."""
    cfg = copy.deepcopy(cfg)
    mapping = {
        "delta": "delta",
        "epsilon": "epsilon",
        "nfft": "n_fft",
        "granularity": "granularity",
        "seed": "seed",
        "out": "out_dir",
        "workers": "workers",
    }
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "budget", None) is not None:
        cfg["budget"]["max_queries"] = args.budget
    if not 0.0 < cfg["delta"] <= 1.0:
        raise InvalidParameterError(f"delta must be in (0, 1], got {cfg['delta']}")
    if not 0.0 < cfg["epsilon"] <= 1.0:
        raise InvalidParameterError(f"epsilon must be in (0, 1], got {cfg['epsilon']}")
    return cfg


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def budget_from(cfg: dict) -> SearchBudget:
    b = cfg.get("budget", {})
    return SearchBudget(
        max_queries=int(b.get("max_queries", 50_000)),
        max_refine_depth=int(b.get("max_refine_depth", 32)),
        seed=int(b.get("seed", cfg.get("seed", 0))),
    )


def _template_from_wav(path: str, n_fft: int) -> list[float]:
    sig = read_wav(path)
    spectrum = forward_fft(sig, n_fft=n_fft)
    return np.log(np.abs(spectrum.bins) + 1e-12).tolist()


def build_model(spec: dict) -> ClassifierHandle:
    if "id" not in spec or "type" not in spec:
        raise InvalidInputError(f"model spec needs 'id' and 'type': {spec}")
    kind = spec["type"]
    if kind == "band_energy":
        backend = BandEnergySpec(
            band_edges_hz=tuple(spec["band_edges_hz"]),
            temperature=float(spec.get("temperature", 1.0)),
        )
        rate = int(spec["sample_rate_hz"])
        backend.check_rate(rate)
        labels = spec.get("labels") or [f"band{i}" for i in range(backend.n_classes)]
        if len(labels) != backend.n_classes:
            raise InvalidInputError(
                f"model {spec['id']}: {len(labels)} labels for {backend.n_classes} bands"
            )
        return ClassifierHandle(
            id=spec["id"], labels=tuple(labels), backend=backend,
            expected_sample_rate_hz=rate,
        )
    if kind == "template":
        if "templates" in spec:
            templates = [tuple(t) for t in spec["templates"]]
        elif "template_wavs" in spec:
            n_fft = int(spec["n_fft"])
            templates = [tuple(_template_from_wav(p, n_fft)) for p in spec["template_wavs"]]
        else:
            raise InvalidInputError(f"model {spec['id']}: needs 'templates' or 'template_wavs'")
        backend = TemplateSpec(
            templates=tuple(templates),
            temperature=float(spec.get("temperature", 0.05)),
        )
        labels = spec.get("labels") or [f"class{i}" for i in range(backend.n_classes)]
        if len(labels) != backend.n_classes:
            raise InvalidInputError(
                f"model {spec['id']}: {len(labels)} labels for {backend.n_classes} templates"
            )
        return ClassifierHandle(
            id=spec["id"], labels=tuple(labels), backend=backend,
            expected_sample_rate_hz=int(spec["sample_rate_hz"]),
        )
    if kind == "external":
        from .protocol import connect_external

        return connect_external(
            spec["id"],
            spec["endpoint"],
            timeout_s=float(spec.get("timeout_s", 30.0)),
            max_inflight=int(spec.get("max_inflight", 32)),
        )
    raise InvalidInputError(f"unknown model type {kind!r}")


def build_models(cfg: dict) -> dict[str, ClassifierHandle]:
    handles = [build_model(spec) for spec in cfg.get("models", [])]
    return build_registry(handles)


def load_corpus(cfg: dict) -> list[tuple[str, Signal]]:
    """Resolve corpus entries (files or directories) to (id, Signal) pairs,
    sorted by path for reproducibility."""
    paths: list[str] = []
    for entry in cfg.get("corpus", []):
        if os.path.isdir(entry):
            paths.extend(sorted(glob.glob(os.path.join(entry, "*.wav"))))
        else:
            paths.append(entry)
    out = []
    for p in paths:
        out.append((os.path.splitext(os.path.basename(p))[0], read_wav(p)))
    return out
