"""Synthetic dataset generators for the desk-scale experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .rng import ROLE_DATA, stream
from .targets import MixtureTarget


@dataclass(frozen=True)
class DatasetSpec:
    name: str  # point_mass | gaussian_mixture | swiss_roll
    params: dict = field(default_factory=dict)
    seed: int = 0


def swiss_roll(n: int, seed: int, angle_lo: float = 1.5 * math.pi,
               angle_hi: float = 4.5 * math.pi, scale: float | None = None,
               jitter: float = 0.0) -> np.ndarray:
    """2-D spiral u -> (u cos u, u sin u) / (4.5 pi), radii in [1/3, 1]."""
    rng = stream(seed, ROLE_DATA)
    u = rng.uniform(angle_lo, angle_hi, size=n)
    if scale is None:
        scale = 1.0 / angle_hi
    pts = np.stack([u * np.cos(u), u * np.sin(u)], axis=1) * scale
    if jitter > 0.0:
        pts = pts + jitter * rng.standard_normal((n, 2))
    return pts


def generate_dataset(ds: DatasetSpec) -> np.ndarray:
    p = dict(ds.params)
    if ds.name == "point_mass":
        x0 = np.atleast_1d(np.asarray(p.get("x0", -1.0), float))
        n = int(p.get("n", 1))
        return np.tile(x0, (n, 1))
    if ds.name == "gaussian_mixture":
        target = MixtureTarget.from_dict(p["target"]) \
            if "target" in p else MixtureTarget(p["weights"], p["means"], p["vars"])
        return target.sample(int(p.get("n", 1000)), ds.seed)
    if ds.name == "swiss_roll":
        return swiss_roll(int(p.get("n", 1000)), ds.seed,
                          angle_lo=float(p.get("angle_lo", 1.5 * math.pi)),
                          angle_hi=float(p.get("angle_hi", 4.5 * math.pi)),
                          scale=p.get("scale"),
                          jitter=float(p.get("jitter", 0.0)))
    raise ConfigurationError(f"unknown dataset {ds.name!r}")


def empirical_target(points: np.ndarray) -> MixtureTarget:
    """Dataset as a mixture of point masses, one per row."""
    pts = np.atleast_2d(np.asarray(points, float))
    n = pts.shape[0]
    return MixtureTarget(np.full(n, 1.0 / n), pts, np.zeros(n))
