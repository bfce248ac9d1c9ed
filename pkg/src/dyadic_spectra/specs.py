"""JSON measure specifications.

``{"type": "dirac" | "uniform" | "sparse" | "cantor" | "riesz" | "liouville"
| "convolve_power" | "atoms" | "random_sparse", ...}``; rationals may be
given as ``"num/den"`` strings.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ._exact import as_fraction
from .measure import (
    DyadicMeasure,
    convolve_power,
    make_atoms,
    make_cantor,
    make_dirac,
    make_liouville_truncation,
    make_riesz_sampled,
    make_sparse,
    make_uniform,
)

__all__ = ["SpecError", "load_spec", "measure_from_spec"]


class SpecError(ValueError):
    """Malformed or unresolvable measure specification."""


def load_spec(text_or_path: str) -> dict:
    """Parse inline JSON or read a JSON file."""
    s = text_or_path.strip()
    if s.startswith("{"):
        try:
            return json.loads(s)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid inline JSON: {exc}") from exc
    path = Path(s)
    if not path.is_file():
        raise SpecError(f"measure spec file not found: {s}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON in {s}: {exc}") from exc


def _need(spec: dict, *keys):
    missing = [k for k in keys if k not in spec]
    if missing:
        raise SpecError(f"{spec.get('type')!r} spec missing {missing}")
    return [spec[k] for k in keys]


def measure_from_spec(spec: dict, seed: int | None = None) -> DyadicMeasure:
    if not isinstance(spec, dict) or "type" not in spec:
        raise SpecError("measure spec must be an object with a 'type'")
    kind = spec["type"]
    try:
        if kind == "dirac":
            pos, K = _need(spec, "position", "K")
            return make_dirac(as_fraction(pos), int(K))
        if kind == "uniform":
            (K,) = _need(spec, "K")
            return make_uniform(int(K))
        if kind == "sparse":
            support, K = _need(spec, "support", "K")
            return make_sparse([int(c) for c in support], int(K))
        if kind == "cantor":
            pattern, depth = _need(spec, "pattern", "depth")
            return make_cantor(pattern, int(depth))
        if kind == "riesz":
            kmax, K = _need(spec, "kmax", "K")
            return make_riesz_sampled(int(kmax), int(K))
        if kind == "liouville":
            levels, K = _need(spec, "levels", "K")
            return make_liouville_truncation([(int(M), int(k)) for M, k in levels], int(K))
        if kind == "convolve_power":
            base, m = _need(spec, "base", "m")
            mu = measure_from_spec(base, seed)
            return convolve_power(mu, int(m), spec.get("resolution"))
        if kind == "atoms":
            K, weights = _need(spec, "K", "weights")
            if isinstance(weights, dict):
                weights = {int(c): as_fraction(v) for c, v in weights.items()}
            else:
                weights = [as_fraction(v) for v in weights]
            return make_atoms(int(K), weights)
        if kind == "random_sparse":
            K, count = _need(spec, "K", "atoms")
            rng = np.random.default_rng(spec.get("seed", seed if seed is not None else 0))
            cells = rng.choice(1 << int(K), size=int(count), replace=False)
            lo, hi = spec.get("weight_range", [1, 100])
            w = rng.integers(int(lo), int(hi) + 1, size=int(count))
            return make_atoms(int(K), {int(c): int(x) for c, x in zip(cells, w)})
    except SpecError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise SpecError(f"bad {kind!r} spec: {exc}") from exc
    raise SpecError(f"unknown measure type {kind!r}")
