import json
import math

import numpy as np
import pytest

from radmonge.domain import (DEFAULT_EPS_LIST, DensityPair, ExperimentConfig,
                             ValidationError, check_compatibility, load_config,
                             make_preset, normalize_target_per_theta,
                             quadrature_2d)


def _write(tmp_path, obj):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(obj))
    return str(p)


class TestConfig:
    def test_defaults_filled(self, tmp_path):
        cfg = load_config(_write(tmp_path, {"n_r": 101}))
        assert cfg.n_r == 101
        assert cfg.eps_list == DEFAULT_EPS_LIST
        assert cfg.preset == "annulus-const"

    def test_eps_out_of_range(self, tmp_path):
        with pytest.raises(ValidationError):
            load_config(_write(tmp_path, {"eps_list": [0.1, 2.0]}))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            load_config(_write(tmp_path, {"n_rr": 5}))

    def test_malformed_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ValidationError):
            load_config(str(p))

    def test_grid_too_small(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(n_r=2)


class TestPresets:
    def test_annulus_const_values(self, preset_small):
        d, t = preset_small
        assert np.all(t.R1 == 1.5) and np.all(t.R2 == 2.5)
        assert np.allclose(d.f, 4.0 / math.pi)
        assert np.allclose(d.g, 1.0 / math.pi)

    def test_unknown_preset(self):
        with pytest.raises(ValidationError):
            make_preset("nope")

    def test_compatibility_const(self, preset_small):
        _, maxdef = check_compatibility(*preset_small)
        assert maxdef < 1e-12

    def test_compatibility_linearity(self, preset_small):
        d, t = preset_small
        g = d.g.copy()
        g[:, 7] *= 2.0
        d2 = DensityPair(radial=d.radial, theta=d.theta, lam=d.lam, f=d.f, g=g)
        defect, _ = check_compatibility(d2, t)
        assert abs(defect[7] - 2.0 / math.pi) < 1e-10
        assert np.all(defect[np.arange(65) != 7] < 1e-12)

    def test_normalize_idempotent(self):
        d, t = make_preset("annulus-sin", n_r=201, n_theta=33, n_lam=201)
        _, maxdef = check_compatibility(d, t)
        assert maxdef < 1e-12
        d2 = normalize_target_per_theta(d, t)
        assert np.max(np.abs(d2.g - d.g)) < 1e-14 * np.max(d.g)

    def test_normalize_undoes_global_scale(self, preset_small):
        d, t = preset_small
        d2 = DensityPair(radial=d.radial, theta=d.theta, lam=d.lam,
                         f=d.f, g=2.0 * d.g)
        d3 = normalize_target_per_theta(d2, t)
        assert np.allclose(d3.g, d.g, rtol=1e-12)


class TestQuadrature:
    def test_area_polar(self, preset_small):
        d, _ = preset_small
        val = quadrature_2d(np.ones_like(d.f), d, "r dr dtheta")
        assert abs(val - math.pi / 4.0) < 1e-10 + 2e-6  # r_min sliver

    def test_field_r(self, preset_small):
        d, _ = preset_small
        val = quadrature_2d(np.tile(d.radial.nodes[:, None], (1, 65)), d,
                            "r dr dtheta")
        assert abs(val - math.pi / 6.0) < 2e-6  # trapezoid O(h^2)

    def test_annulus_area(self, preset_small):
        d, t = preset_small
        val = quadrature_2d(np.ones_like(d.g), d, "dx", t=t)
        assert abs(val - math.pi) < 1e-10

    def test_second_order_convergence(self):
        errs = []
        for n_r in (201, 401):
            d, _ = make_preset("annulus-const", n_r=n_r, n_theta=33, n_lam=33)
            val = quadrature_2d(np.ones((n_r, 33)), d, "r dr dtheta")
            errs.append(abs(val - math.pi / 4.0))
        assert 3.5 <= errs[0] / errs[1] <= 4.5

    def test_dx_requires_target(self, preset_small):
        d, _ = preset_small
        with pytest.raises(ValidationError):
            quadrature_2d(np.ones_like(d.g), d, "dx")
