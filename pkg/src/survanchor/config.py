"""Run configuration: one JSON document per run, validated with field paths.

The config is the single source of truth for a pipeline run; subcommands pull
the blocks they need (``data``, ``model``, ``sampler``, ``extrapolation``,
``mortality``, ``estimands``, ``simulate``, ``report``) and compose through
files in the output directory.  Every output file embeds the artifact version
and a short hash of the canonicalized config so artifacts can be traced back
to the run that produced them.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .hazards import Family
from .inference import SamplerConfig
from .model import ComponentDecl, GroupDecl, JointModelSpec, Prior, PriorSpec, Role


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration; message carries the field path."""


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def _require(cfg: dict, field: str, path: str):
    if field not in cfg:
        raise ConfigError(f"missing required field {path}.{field}")
    return cfg[field]


def _get(cfg: dict, field: str, default=None):
    return cfg.get(field, default)


# ---------------------------------------------------------------------------
# model block
# ---------------------------------------------------------------------------


def _parse_component(obj: dict, path: str) -> ComponentDecl:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: component must be an object")
    role = Role(_get(obj, "role", "free"))
    try:
        if role is Role.FREE:
            fam = _require(obj, "family", path)
            return ComponentDecl(family=Family(fam))
        return ComponentDecl(role=role, of=int(_require(obj, "of", path)))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_group(obj: dict, path: str) -> GroupDecl:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: must be an object")
    if "components" in obj:
        segments = [obj["components"]]
        cps: list[float] = []
    else:
        segments = _require(obj, "segments", path)
        cps = _get(obj, "change_points", [])
    try:
        return GroupDecl(
            segments=tuple(
                tuple(_parse_component(c, f"{path}.segments[{s}][{i}]") for i, c in enumerate(seg))
                for s, seg in enumerate(segments)
            ),
            change_points=tuple(float(c) for c in cps),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def build_model_spec(cfg: dict) -> JointModelSpec:
    block = _require(cfg, "model", "config")
    population = _parse_group(_require(block, "population", "model"), "model.population")
    disease = None
    if _get(block, "disease") is not None:
        disease = _parse_group(block["disease"], "model.disease")
    try:
        return JointModelSpec(
            population=population,
            disease=disease,
            cause_specific=bool(_get(block, "cause_specific", False)),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None


def _parse_prior(obj: dict, path: str) -> Prior:
    dist = _require(obj, "dist", path)
    try:
        if dist == "exponential":
            rate = obj["rate"] if "rate" in obj else 1.0 / float(_require(obj, "mean", path))
            return Prior("exponential", float(rate))
        if dist == "gamma":
            return Prior("gamma", float(_require(obj, "shape", path)), float(_require(obj, "rate", path)))
        if dist == "normal":
            return Prior("normal", float(_get(obj, "mean", 0.0)), float(_require(obj, "sd", path)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raise ConfigError(f"{path}: unknown prior distribution {dist!r}")


def build_priors(cfg: dict) -> PriorSpec:
    block = _get(_get(cfg, "model", {}), "priors", {})
    defaults = dict(PriorSpec().defaults)
    overrides = {}
    for key, obj in block.items():
        prior = _parse_prior(obj, f"model.priors.{key}")
        if key in defaults:
            defaults[key] = prior
        else:
            overrides[key] = prior
    return PriorSpec(defaults=defaults, overrides=overrides)


def build_sampler_config(cfg: dict, seed_override: int | None = None) -> SamplerConfig:
    block = _get(cfg, "sampler", {})
    seed = seed_override if seed_override is not None else _get(cfg, "seed", 0)
    try:
        return SamplerConfig(
            chains=int(_get(block, "chains", 4)),
            warmup=int(_get(block, "warmup", 1000)),
            samples=int(_get(block, "samples", 1000)),
            seed=int(seed),
            target_accept=float(_get(block, "target_accept", 0.8)),
            max_tree_depth=int(_get(block, "max_tree_depth", 10)),
        )
    except ValueError as exc:
        raise ConfigError(f"sampler: {exc}") from None


def data_paths(cfg: dict, base: Path) -> dict[str, Path]:
    """Group-name -> survival CSV path map, resolved relative to the config."""
    block = _get(cfg, "data", {})
    out = {}
    for key in ("population", "disease", "cause", "other"):
        if key in block and block[key] is not None:
            out[key] = _resolve(block[key], base)
    return out


def _resolve(p, base: Path) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p
