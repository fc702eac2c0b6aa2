import math

import numpy as np
import pytest

from radmonge.domain import ValidationError
from radmonge.energy import MapField, snap_delta
from radmonge.recovery import (SourceChart, assemble_recovery, evaluate_field,
                               moser_patch, rescale_densities)


def ramp_density(m):
    c = (np.arange(m) + 0.5) / m
    f2 = 0.7 + 0.6 * c[:, None] + 0.0 * c[None, :]
    return f2 * (1.0 / (f2.mean()))  # unit mass, matches uniform f1


class TestMoserPatch:
    def test_identity(self):
        m = 64
        f = np.ones((m, m))
        patch = moser_patch(f, f)
        assert patch.defect < 1e-12
        pts = np.array([[0.3, 0.4], [0.7, 0.2], [0.5, 0.9]])
        assert np.max(np.abs(patch.transport(pts) - pts)) < 1e-12

    def test_uniform_to_ramp(self):
        m = 128
        patch = moser_patch(np.ones((m, m)), ramp_density(m))
        assert patch.defect < 1e-3
        assert patch.clamp_fraction < 0.001
        assert patch.lip_chart < 10.0

    def test_defect_shrinks_under_refinement(self):
        d128 = moser_patch(np.ones((128, 128)), ramp_density(128)).defect
        d256 = moser_patch(np.ones((256, 256)), ramp_density(256)).defect
        assert d256 < 0.6 * d128

    def test_mass_mismatch(self):
        with pytest.raises(ValidationError):
            moser_patch(np.ones((32, 32)), 2.0 * np.ones((32, 32)))

    def test_nonpositive_density(self):
        bad = np.ones((32, 32))
        bad[3, 3] = 0.0
        with pytest.raises(ValidationError):
            moser_patch(bad, np.ones((32, 32)))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            moser_patch(np.ones((32, 32)), np.ones((16, 16)))


class TestRescaleDensities:
    def test_values_const_preset(self, preset_small, obstacle_small,
                                 original_small):
        d, t = preset_small
        _, delta = snap_delta(d.radial.nodes, 1e-3)  # delta near 0.1
        f_d, g_d = rescale_densities(d, original_small, obstacle_small.Phi,
                                     delta, t)
        # constant source density rescales to itself
        assert np.max(np.abs(f_d - 4.0 / math.pi)) < 1e-12
        assert f_d.min() >= d.inf_f - 1e-12
        assert f_d.max() <= d.sup_f + 1e-12
        # constant target: g_delta = gap / delta^2 * (1/pi), lambda-free
        i_d = int(np.argmin(np.abs(original_small.radial - delta)))
        gap = original_small.phi[i_d, :] - obstacle_small.Phi.values
        expect = gap / delta ** 2 / math.pi
        assert np.max(np.abs(g_d - expect[None, :])) < 1e-10 * expect.max()
        assert np.max(np.ptp(g_d, axis=0)) < 1e-10 * expect.max()

    def test_unsnapped_delta_rejected(self, preset_small, obstacle_small,
                                      original_small):
        d, t = preset_small
        with pytest.raises(ValidationError):
            rescale_densities(d, original_small, obstacle_small.Phi,
                              0.1 + 0.3 * (d.radial.nodes[1]
                                           - d.radial.nodes[0]), t)


class TestSourceChart:
    def test_roundtrip(self):
        chart = SourceChart()
        rng = np.random.default_rng(1)
        th = rng.random(500) * math.pi / 2.0
        rad = rng.random(500) ** 0.5
        pts = np.stack([rad * np.cos(th), rad * np.sin(th)], axis=1)
        back = chart.inverse(chart.forward(pts))
        assert np.max(np.linalg.norm(back - pts, axis=1)) < 1e-12

    def test_seam_arc_to_right_edge(self):
        chart = SourceChart()
        th = np.linspace(0.0, math.pi / 2.0, 257)
        arc = np.stack([np.cos(th), np.sin(th)], axis=1)
        z = chart.forward(arc)
        assert np.max(np.abs(z[:, 0] - 1.0)) < 1e-9
        assert np.max(np.abs(z[:, 1] - 2.0 * th / math.pi)) < 1e-6

    def test_corner_to_left_edge_midpoint(self):
        chart = SourceChart()
        z = chart.forward(np.array([[0.0, 0.0]]))
        assert np.max(np.abs(z[0] - np.array([0.0, 0.5]))) < 1e-9


class TestEvaluateField:
    def test_identity_field(self, preset_small):
        d, _ = preset_small
        r = d.radial.nodes
        phi = np.tile(r[:, None], (1, 65))
        field = MapField(radial=r, theta=d.theta.nodes, phi=phi,
                         psi=np.zeros_like(phi))
        rng = np.random.default_rng(2)
        th = rng.random(300) * math.pi / 2.0
        rad = d.radial.r_min + rng.random(300) * (1.0 - d.radial.r_min)
        pts = np.stack([rad * np.cos(th), rad * np.sin(th)], axis=1)
        out = evaluate_field(field, pts)
        assert np.max(np.linalg.norm(out - pts, axis=1)) < 1e-10


@pytest.fixture(scope="module")
def assembled(preset_small, obstacle_small, original_small):
    d, t = preset_small
    return assemble_recovery(original_small, d, t, obstacle_small.Phi,
                             eps=1e-3, patch_m=128)


class TestAssembleRecovery:
    def test_outside_untouched(self, assembled, original_small):
        i_d = int(np.argmin(np.abs(original_small.radial - assembled.delta)))
        assert np.array_equal(assembled.field.phi[i_d:, :],
                              original_small.phi[i_d:, :])
        assert np.all(assembled.field.psi[i_d:, :] == 0.0)

    def test_delta_is_cube_root(self, assembled, preset_small):
        d, _ = preset_small
        dr = d.radial.nodes[1] - d.radial.nodes[0]
        assert abs(assembled.delta - 1e-1) <= dr

    def test_seam_mismatch(self, assembled):
        assert assembled.seam_mismatch < 1e-8

    def test_patch_diagnostics(self, assembled):
        assert assembled.patch_defect < 1e-2
        assert np.isfinite(assembled.lip_S) and assembled.lip_S > 0
        assert assembled.patch.clamp_fraction < 0.001

    def test_field_lands_in_target(self, assembled, preset_small):
        _, t = preset_small
        rad = np.hypot(assembled.field.phi, assembled.field.psi)
        assert rad.min() >= 1.5 - 1e-6
        assert rad.max() <= 2.5 + 1e-6

    def test_too_small_delta_rejected(self, preset_small, obstacle_small,
                                      original_small):
        d, t = preset_small
        with pytest.raises(ValidationError):
            assemble_recovery(original_small, d, t, obstacle_small.Phi,
                              eps=1e-9, patch_m=32)
