import math

import numpy as np
import pytest

import sdelab as sl
from sdelab.config import ExperimentConfig, load_config, provenance_header
from sdelab.datasets import DatasetSpec, generate_dataset, swiss_roll
from sdelab.errors import ConfigurationError


class TestDatasets:
    def test_point_mass(self):
        ds = DatasetSpec(name="point_mass", params={"x0": -1.0, "n": 3})
        out = generate_dataset(ds)
        assert out.shape == (3, 1)
        assert np.all(out == -1.0)

    def test_swiss_roll_radii(self):
        pts = swiss_roll(1000, seed=1, jitter=0.0)
        radii = np.linalg.norm(pts, axis=1)
        lo, hi = 1.5 * math.pi / (4.5 * math.pi), 1.0
        assert pts.shape == (1000, 2)
        assert np.all(radii >= lo - 1e-12)
        assert np.all(radii <= hi + 1e-12)

    def test_swiss_roll_deterministic(self):
        a = swiss_roll(128, seed=7)
        b = swiss_roll(128, seed=7)
        assert np.array_equal(a, b)
        c = swiss_roll(128, seed=8)
        assert not np.array_equal(a, c)

    def test_gaussian_mixture_dataset(self):
        ds = DatasetSpec(name="gaussian_mixture", seed=3,
                         params={"weights": [0.5, 0.5],
                                 "means": [[0.0], [4.0]],
                                 "vars": [0.1, 0.1], "n": 5000})
        out = generate_dataset(ds)
        assert out.shape == (5000, 1)
        assert abs(out.mean() - 2.0) < 0.1

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError):
            generate_dataset(DatasetSpec(name="blob"))

    def test_empirical_target(self):
        pts = swiss_roll(10, seed=0)
        t = sl.empirical_target(pts)
        assert t.n_components == 10
        assert np.all(t.variances == 0.0)
        assert t.weights.sum() == pytest.approx(1.0)


CONFIG_TEXT = """
[sde]
kind = cou
theta = 0.2
sigma = 0.5
T = 10
dim = 1

[target]
weights = 1.0
means = -1.0
vars = 0.0

[sampler]
n_steps = 500
n_paths = 2000
seed = 7

[noise]
mode = per-eval
epsilon = 0.1
seed = 11

[sweep]
epsilon = 0.02,0.1,1.0
delta = 0.02,0.05
seeds = 4

[output]
dir = out
"""


class TestConfig:
    def test_parse_and_typed_builders(self):
        cfg = load_config(CONFIG_TEXT)
        spec = cfg.sde_spec()
        assert spec.kind is sl.SDEKind.COU
        assert spec.theta == 0.2 and spec.T == 10.0
        target = cfg.target()
        assert target.n_components == 1
        assert target.means[0, 0] == -1.0
        noise = cfg.noise()
        assert noise.epsilon == 0.1 and noise.seed == 11
        assert cfg.get_list("sweep", "epsilon") == [0.02, 0.1, 1.0]

    def test_defaults_fill_in(self):
        cfg = load_config("[sde]\nkind = vp\n")
        spec = cfg.sde_spec()
        assert spec.beta_min == 0.02 and spec.beta_max == 0.2 and spec.T == 10.0

    def test_overrides(self):
        cfg = load_config(CONFIG_TEXT, overrides={"sampler.seed": 99,
                                                  "output.dir": "/tmp/x"})
        assert cfg.get("sampler", "seed", cast=int) == 99
        assert cfg.get("output", "dir") == "/tmp/x"

    def test_2d_means_grammar(self):
        cfg = load_config("[target]\nweights = 0.5,0.5\n"
                          "means = 0.0,1.0; 2.0,3.0\nvars = 0.1,0.2\n")
        t = cfg.target()
        assert t.means.shape == (2, 2)
        assert t.means[1, 1] == 3.0

    def test_hash_stable_and_sensitive(self):
        a = load_config(CONFIG_TEXT)
        b = load_config(CONFIG_TEXT)
        assert a.hash() == b.hash()
        c = load_config(CONFIG_TEXT, overrides={"sampler.seed": 8})
        assert a.hash() != c.hash()

    def test_provenance_header(self):
        cfg = load_config(CONFIG_TEXT)
        hdr = provenance_header(cfg, [0, 1, 2])
        assert hdr.startswith("# sdelab version=")
        assert f"config_hash={cfg.hash()}" in hdr
        assert "seeds=[0,1,2]" in hdr

    def test_missing_file(self):
        with pytest.raises(ConfigurationError):
            load_config("/nonexistent/sdelab.ini")

    def test_serialization_keys_spec(self):
        # spec keys documented for the sde block
        cfg = load_config("[sde]\nkind = ve\nsigma_min = 0.05\n"
                          "sigma_max = 0.5\nT = 10\ndim = 1\n")
        spec = cfg.sde_spec()
        d = spec.to_dict()
        assert d["kind"] == "ve"
        assert set(d) <= {"kind", "theta", "sigma", "mu", "sigma_min",
                          "sigma_max", "beta_min", "beta_max", "T", "dim"}
