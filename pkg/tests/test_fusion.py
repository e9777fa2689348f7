import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radarlabel.fusion import (
    AzimuthReliabilityProfile,
    FusionConfig,
    fuse_and_label,
    gamma_at,
)

FLAT = AzimuthReliabilityProfile(((0.0, 1.0),))


class TestGammaProfile:
    def test_single_breakpoint_is_constant(self):
        for az in (-3.0, 0.0, 0.5, math.pi):
            assert gamma_at(FLAT, az) == 1.0

    def test_linear_interpolation_between_breakpoints(self):
        profile = AzimuthReliabilityProfile(((0.0, 1.0), (math.pi / 2, 2.0)))
        assert gamma_at(profile, math.pi / 4) == pytest.approx(1.5)

    def test_breakpoint_queried_exactly(self):
        profile = AzimuthReliabilityProfile(((-1.0, 1.2), (0.5, 1.8), (2.0, 1.1)))
        for az, g in profile.breakpoints:
            assert gamma_at(profile, az) == pytest.approx(g)

    def test_wraps_around_pi(self):
        profile = AzimuthReliabilityProfile(((-3.0, 1.0), (3.0, 2.0)))
        # between +3.0 and -3.0 + 2*pi the interpolation crosses the seam
        seam = gamma_at(profile, math.pi)
        assert 1.0 < seam < 2.0

    def test_validation(self):
        with pytest.raises(ValueError):
            AzimuthReliabilityProfile(())
        with pytest.raises(ValueError):
            AzimuthReliabilityProfile(((0.0, 0.9),))
        with pytest.raises(ValueError):
            AzimuthReliabilityProfile(((0.5, 1.0), (0.1, 1.0)))


class TestFuseAndLabel:
    def test_optical_only_above_threshold(self):
        w, y = fuse_and_label(0.9, 0.0, 0.0, FLAT, FusionConfig(alpha=1.0, w0=0.5))
        assert (w, y) == (0.9, 1)

    def test_hand_value_with_gamma(self):
        profile = AzimuthReliabilityProfile(((0.0, 2.0),))
        w, y = fuse_and_label(0.8, 0.2, 0.0, profile, FusionConfig(alpha=0.5, w0=0.5))
        assert w == pytest.approx(0.25)
        assert y == 0

    def test_boundary_counts_as_plausible(self):
        w, y = fuse_and_label(0.5, 0.5, 0.0, FLAT, FusionConfig(alpha=0.5, w0=0.5))
        assert w == 0.5 and y == 1

    def test_missing_branch_renormalizes(self):
        cfg = FusionConfig(alpha=0.25, w0=0.5)
        w_opt_only, _ = fuse_and_label(0.8, None, 0.0, FLAT, cfg)
        w_tr_only, _ = fuse_and_label(None, 0.8, 0.0, FLAT, cfg)
        assert w_opt_only == 0.8
        assert w_tr_only == 0.8

    def test_no_evidence_labels_artifact(self):
        w, y = fuse_and_label(None, None, 0.0, FLAT, FusionConfig(alpha=0.5, w0=0.0))
        assert (w, y) == (0.0, 0)

    @settings(max_examples=300, deadline=None)
    @given(
        w_opt=st.floats(0, 1),
        w_tr=st.floats(0, 1),
        alpha=st.floats(0, 1),
        w0=st.floats(0, 1),
        gamma=st.floats(1, 5),
        bump=st.floats(0, 0.5),
    )
    def test_monotone_and_bounded(self, w_opt, w_tr, alpha, w0, gamma, bump):
        profile = AzimuthReliabilityProfile(((0.0, gamma),))
        cfg = FusionConfig(alpha=alpha, w0=w0)
        w, y = fuse_and_label(w_opt, w_tr, 0.0, profile, cfg)
        assert 0.0 <= w <= 1.0
        w_up_opt, y_up_opt = fuse_and_label(min(1.0, w_opt + bump), w_tr, 0.0, profile, cfg)
        w_up_tr, y_up_tr = fuse_and_label(w_opt, min(1.0, w_tr + bump), 0.0, profile, cfg)
        assert w_up_opt >= w and y_up_opt >= y
        assert w_up_tr >= w and y_up_tr >= y
        # raising gamma or w0 never turns an artifact into a target
        wider = AzimuthReliabilityProfile(((0.0, gamma + 1.0),))
        _, y_more_gamma = fuse_and_label(w_opt, w_tr, 0.0, wider, cfg)
        assert y_more_gamma <= y
        _, y_higher_w0 = fuse_and_label(w_opt, w_tr, 0.0, profile, FusionConfig(alpha=alpha, w0=min(1.0, w0 + bump)))
        assert y_higher_w0 <= y

    @settings(max_examples=100, deadline=None)
    @given(w_opt=st.floats(0, 1), w_tr=st.floats(0, 1), w0=st.floats(0, 1))
    def test_alpha_extremes_select_single_branch(self, w_opt, w_tr, w0):
        w1, y1 = fuse_and_label(w_opt, w_tr, 0.0, FLAT, FusionConfig(alpha=1.0, w0=w0))
        assert w1 == w_opt and y1 == int(w_opt >= w0)
        w0_, y0 = fuse_and_label(w_opt, w_tr, 0.0, FLAT, FusionConfig(alpha=0.0, w0=w0))
        assert w0_ == w_tr and y0 == int(w_tr >= w0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FusionConfig(alpha=1.2, w0=0.5)
        with pytest.raises(ValueError):
            FusionConfig(alpha=0.5, w0=-0.1)
