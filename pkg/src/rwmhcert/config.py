"""Run configuration: a YAML file with ``target``, ``proposal``, ``pipeline`` and ``output`` sections.

Example::

    target:
      preset: standard_normal
      dim: 1
    proposal:
      family: gaussian
      scale: 1.0
    pipeline:
      K: 0.3333333333333333
      mc: 100000
      seed: 0
      grid: {half_width: 8.0, n: 161}
    output:
      dir: out

Unknown keys are rejected before any computation.  Dataset paths are
resolved relative to the config file.  Seed precedence is the ``--seed``
flag, then the ``RWMHCERT_SEED`` environment variable, then
``pipeline.seed``.
"""
from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .geometry import ConeParamError, ConeParams

SEED_ENV = "RWMHCERT_SEED"

PRESETS = {
    "standard_normal": {"dim", "eta"},
    "gaussian": {"dim", "scale", "eta"},
    "gaussian_mixture": {"a", "envelope_constant"},
    "logistic": {"data", "eta", "prior_precision", "normalization", "log_norm"},
    "poisson": {"data", "prior_precision", "normalization", "log_norm"},
}

SECTION_KEYS = {
    "target": {"preset"},
    "proposal": {"family", "scale"},
    "pipeline": {"eps_alpha", "K", "candidates", "mc", "seed", "grid", "chain", "tv_steps",
                 "slack", "n_directions", "radii", "include_spectral"},
    "output": {"dir"},
}
GRID_KEYS = {"half_width", "n"}
CHAIN_KEYS = {"steps", "initial", "record_every", "chain_index"}

PIPELINE_DEFAULTS = {
    "eps_alpha": None,
    "K": 1.0 / 3.0,
    "candidates": None,
    "mc": 100_000,
    "seed": 0,
    "grid": None,
    "chain": None,
    "tv_steps": 100,
    "slack": 1e-3,
    "n_directions": 64,
    "radii": None,
    "include_spectral": True,
}


class ConfigError(ValueError):
    """Schema or value error in a run configuration."""


@dataclass
class RunConfig:
    target: dict
    proposal: dict
    pipeline: dict
    output: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)
    source: str = "<dict>"

    @property
    def preset(self) -> str:
        return self.target["preset"]

    @property
    def seed(self) -> int:
        return int(self.pipeline["seed"])

    def data_path(self) -> Path:
        p = Path(self.target["data"])
        return p if p.is_absolute() else (self.base_dir / p)

    def canonical(self) -> dict:
        """Plain-data view used for hashing and echoing into reports (no paths on disk)."""
        return {"target": self.target, "proposal": self.proposal, "pipeline": self.pipeline}


def _reject_unknown(section, got, allowed):
    extra = sorted(set(got) - set(allowed))
    if extra:
        raise ConfigError(f"config: unknown key(s) in [{section}]: {', '.join(extra)}")


def _positive(section, key, v, integer=False):
    try:
        f = int(v) if integer else float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"config: [{section}].{key} must be a number, got {v!r}") from None
    if integer and f != v:
        raise ConfigError(f"config: [{section}].{key} must be an integer, got {v!r}")
    if not f > 0:
        raise ConfigError(f"config: [{section}].{key} must be positive, got {v!r}")
    return f


def parse_config(raw: dict, base_dir=None, source="<dict>", seed=None, env=None) -> RunConfig:
    """Validate a raw mapping and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    _reject_unknown("top level", raw, SECTION_KEYS)
    raw = copy.deepcopy(raw)
    tgt = raw.get("target") or {}
    if "preset" not in tgt:
        raise ConfigError("config: [target].preset is required")
    preset = tgt["preset"]
    if preset not in PRESETS:
        raise ConfigError(f"config: unknown target preset {preset!r}; choose from {sorted(PRESETS)}")
    _reject_unknown("target", tgt, SECTION_KEYS["target"] | PRESETS[preset])
    if preset in ("logistic", "poisson") and "data" not in tgt:
        raise ConfigError(f"config: [target].data is required for preset {preset!r}")
    if "dim" in tgt:
        tgt["dim"] = int(_positive("target", "dim", tgt["dim"], integer=True))
    for key in ("scale", "a", "prior_precision"):
        if key in tgt:
            tgt[key] = _positive("target", key, tgt[key])
    if "eta" in tgt:
        eta = float(tgt["eta"])
        if not 0.0 < eta < 1.0:
            raise ConfigError(f"config: [target].eta must lie in (0, 1), got {eta!r}")
        tgt["eta"] = eta

    prop = raw.get("proposal") or {}
    _reject_unknown("proposal", prop, SECTION_KEYS["proposal"])
    prop.setdefault("family", "gaussian")
    if prop["family"] not in ("gaussian", "laplace"):
        raise ConfigError(f"config: [proposal].family must be gaussian or laplace, got {prop['family']!r}")
    prop["scale"] = _positive("proposal", "scale", prop.get("scale", 1.0))

    pipe = raw.get("pipeline") or {}
    _reject_unknown("pipeline", pipe, SECTION_KEYS["pipeline"])
    pipe = {**PIPELINE_DEFAULTS, **pipe}
    pipe["K"] = float(pipe["K"])
    if pipe["eps_alpha"] is not None:
        pipe["eps_alpha"] = float(pipe["eps_alpha"])
    # cone constraints are checked here so a bad value never reaches the numerics
    try:
        if pipe["eps_alpha"] is not None:
            ConeParams(eps_alpha=pipe["eps_alpha"], K=pipe["K"])
        else:
            ConeParams.from_eta(0.5, K=pipe["K"])
    except ConeParamError as exc:
        raise ConfigError(f"config: [pipeline] {exc}") from None
    pipe["mc"] = int(_positive("pipeline", "mc", pipe["mc"], integer=True))
    if pipe["mc"] < 10_000:
        raise ConfigError("config: [pipeline].mc must be at least 10000")
    pipe["tv_steps"] = int(_positive("pipeline", "tv_steps", pipe["tv_steps"], integer=True))
    pipe["n_directions"] = int(_positive("pipeline", "n_directions", pipe["n_directions"], integer=True))
    pipe["slack"] = float(pipe["slack"])
    if pipe["slack"] < 0:
        raise ConfigError("config: [pipeline].slack must be non-negative")
    if pipe["grid"] is not None:
        _reject_unknown("pipeline.grid", pipe["grid"], GRID_KEYS)
    if pipe["chain"] is not None:
        _reject_unknown("pipeline.chain", pipe["chain"], CHAIN_KEYS)
    if pipe["candidates"] is not None:
        pipe["candidates"] = [list(np.atleast_1d(np.asarray(c, dtype=float)).tolist())
                              for c in pipe["candidates"]]

    env = os.environ if env is None else env
    if seed is not None:
        pipe["seed"] = int(seed)
    elif env.get(SEED_ENV):
        try:
            pipe["seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"config: {SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
    pipe["seed"] = int(pipe["seed"])
    if not 0 <= pipe["seed"] < 2**63:
        raise ConfigError(f"config: seed must be a non-negative integer, got {pipe['seed']!r}")

    out = raw.get("output") or {}
    _reject_unknown("output", out, SECTION_KEYS["output"])
    return RunConfig(target=tgt, proposal=prop, pipeline=pipe, output=out,
                     base_dir=Path(base_dir) if base_dir is not None else Path.cwd(), source=source)


def load_config(path, seed=None, env=None) -> RunConfig:
    """Read and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: {path} is not valid YAML: {exc}") from None
    return parse_config(raw, base_dir=path.parent, source=str(path), seed=seed, env=env)
