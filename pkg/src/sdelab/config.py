"""Experiment configuration: INI-style files with flat key=value sections.

Grammar (see docs/config.md): every experiment reads a subset of the
sections [sde], [target], [dataset], [sampler], [noise], [metric],
[sweep], [compare], [output]; family sections like [ou] or [csubvp]
override [sde] keys for that family inside a comparison. CLI flags
override file keys.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .sde import DiffusionSpec, SDEKind
from .scores import NoiseModel
from .targets import MixtureTarget

# 1-D benchmark defaults shared by the experiments.
DEFAULTS_1D = {
    "theta": 0.2, "sigma": 0.5,
    "beta_min": 0.02, "beta_max": 0.2,
    "sigma_min": 0.05, "sigma_max": 0.5,
    "T": 10.0, "dim": 1,
}


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=dict)

    def get(self, section: str, key: str, default=None, cast=str):
        sec = self.sections.get(section, {})
        if key not in sec:
            return default
        raw = sec[key]
        if cast is bool:
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)

    def get_list(self, section: str, key: str, default=None, cast=float):
        sec = self.sections.get(section, {})
        if key not in sec:
            return default
        return [cast(tok.strip()) for tok in str(sec[key]).split(",") if tok.strip()]

    def set(self, section: str, key: str, value):
        self.sections.setdefault(section, {})[key] = str(value)

    def canonical_text(self) -> str:
        # worker count and artifact location are execution details: the
        # same experiment must hash identically regardless of where or how
        # parallel it ran
        out = []
        for sec in sorted(self.sections):
            if sec == "output":
                continue
            keys = sorted(self.sections[sec])
            if sec == "run":
                keys = [k for k in keys if k != "threads"]
            if not keys:
                continue
            out.append(f"[{sec}]")
            for k in keys:
                out.append(f"{k} = {self.sections[sec][k]}")
        return "\n".join(out) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    # -- typed builders -------------------------------------------------

    def sde_spec(self, family: str | None = None) -> DiffusionSpec:
        base = dict(self.sections.get("sde", {}))
        if family is not None:
            base["kind"] = family
            base.update(self.sections.get(family, {}))
        if "kind" not in base:
            raise ConfigurationError("[sde] needs a 'kind' key (or pass a family)")
        kind = SDEKind(base["kind"].lower())
        d: dict = {"kind": kind.value}
        for key in ("T", "dim", "theta", "sigma", "sigma_min", "sigma_max",
                    "beta_min", "beta_max"):
            if key in base:
                d[key] = float(base[key]) if key != "dim" else int(base[key])
        if "mu" in base:
            d["mu"] = [float(v) for v in str(base["mu"]).split(",")]
        # fill family defaults for missing keys
        need = {"ou": ("theta", "sigma"), "cou": ("theta", "sigma"),
                "ve": ("sigma_min", "sigma_max")}
        fallback = need.get(kind.value, ("beta_min", "beta_max"))
        for key in fallback + ("T", "dim"):
            d.setdefault(key, DEFAULTS_1D[key])
        return DiffusionSpec.from_dict(d)

    def target(self) -> MixtureTarget | None:
        sec = self.sections.get("target")
        if not sec:
            return None
        w = [float(v) for v in sec["weights"].split(",")]
        vs = [float(v) for v in sec["vars"].split(",")]
        means = [[float(v) for v in row.split(",")]
                 for row in sec["means"].split(";")]
        return MixtureTarget(np.asarray(w), np.asarray(means), np.asarray(vs))

    def noise(self) -> NoiseModel:
        sec = self.sections.get("noise", {})
        return NoiseModel(mode=sec.get("mode", "per-eval"),
                          epsilon=float(sec.get("epsilon", 0.0)),
                          seed=int(sec.get("seed", 0)))


def load_config(path_or_text, overrides: dict | None = None) -> ExperimentConfig:
    """Parse the INI grammar; `overrides` maps 'section.key' to values."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep key case
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        cp.read_string(path_or_text)
    elif isinstance(path_or_text, io.IOBase):
        cp.read_file(path_or_text)
    elif path_or_text is not None:
        read = cp.read(str(path_or_text))
        if not read:
            raise ConfigurationError(f"config file not found: {path_or_text}")
    cfg = ExperimentConfig({s: dict(cp[s]) for s in cp.sections()})
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        if "." not in dotted:
            raise ConfigurationError(f"override key must be section.key: {dotted!r}")
        section, key = dotted.split(".", 1)
        cfg.set(section, key, value)
    return cfg


def provenance_header(cfg: ExperimentConfig, seeds, version: str = "0.1.0") -> str:
    seed_txt = ",".join(str(s) for s in seeds)
    return (f"# sdelab version={version} config_hash={cfg.hash()} "
            f"seeds=[{seed_txt}]\n")
