import math

import numpy as np
import pytest

from elastic_lens.convexity import (ConvexityReport, Foliation,
                                    check_foliation, check_hwz,
                                    check_plane_foliation,
                                    conformal_second_fundamental_form)
from elastic_lens.errors import PreconditionError
from elastic_lens.model_core import (ConstantField, DepthField, DiskDomain,
                                     RadialField)


def test_hwz_passes_for_decreasing_speed(linear_radial_speed):
    report = check_hwz(linear_radial_speed, 0.1, 0.99)
    assert report.strictly_convex
    assert report.margin > 0.0
    assert report.witness is None


def test_hwz_exact_margin_linear_profile(linear_radial_speed):
    # d/dr (r/c) = (c - r c') / c^2 = (2 - r + r) / (2 - r)^2 = 2/(2-r)^2,
    # increasing in r, so the minimum sits at the smallest sampled radius
    report = check_hwz(linear_radial_speed, 0.1, 0.9)
    assert report.margin == pytest.approx(2.0 / (2.0 - 0.1) ** 2, rel=1e-9)


def test_hwz_violation_reports_first_witness():
    # c = 1/(2 - r): r/c = r(2 - r) peaks at r = 1, spheres beyond are
    # concave; the first violating sample in scan order is the witness
    f = RadialField(func=lambda r: 1.0 / (2.0 - r),
                    dfunc=lambda r: 1.0 / (2.0 - r) ** 2, r_max=1.8)
    report = check_hwz(f, 0.5, 1.5)
    assert report.verdict == "violated"
    assert report.witness is not None
    assert report.witness["leaf"] > 1.0
    assert report.witness["value"] < 0.0


def test_hwz_flat_for_conical_speed():
    # c = |x|: r/c is constant, spheres are exactly flat in the conformal
    # metric; the verdict reports flatness, not a violation
    f = RadialField(func=lambda r: r, dfunc=lambda r: 1.0, r_max=4.0)
    report = check_hwz(f, 0.5, 2.0)
    assert report.verdict == "flat within tolerance"
    assert abs(report.margin) < 1e-12


def test_hwz_input_validation(linear_radial_speed):
    with pytest.raises(PreconditionError):
        check_hwz(linear_radial_speed, 0.9, 0.1)


def test_plane_foliation_increasing_depth_speed():
    f = DepthField(profile=[(0.0, 1.0), (2.0, 3.0)], dim=2)
    report = check_plane_foliation(f, 1, 0.1, 1.9)
    assert report.strictly_convex


def test_plane_foliation_constant_speed_is_flat():
    report = check_plane_foliation(ConstantField(1.0, dim=2), 0, 0.1, 0.9)
    assert report.verdict == "flat within tolerance"


def test_report_dict_shape(linear_radial_speed):
    report = check_hwz(linear_radial_speed, 0.2, 0.8)
    doc = report.to_dict()
    for key in ("verdict", "margin", "leaf_minima", "witness", "samples"):
        assert key in doc


def test_conformal_form_constant_speed_keeps_euclidean_value():
    f = ConstantField(2.0, dim=2)
    val = conformal_second_fundamental_form(f, (1.0, 0.0), (0.0, 1.0),
                                            (1.0, 0.0), ambient_form=1.0)
    assert val == pytest.approx(1.0)


def test_conformal_form_requires_orthonormal_frame():
    f = ConstantField(1.0, dim=2)
    with pytest.raises(PreconditionError):
        conformal_second_fundamental_form(f, (1.0, 0.0), (1.0, 0.0),
                                          (1.0, 0.0), ambient_form=1.0)


def test_general_foliation_spheres_matches_hwz(linear_radial_speed):
    domain = DiskDomain(1.0)
    fol = Foliation(kind="spheres", params=(0.2, 0.9))
    report = check_foliation(linear_radial_speed, fol, domain)
    assert report.strictly_convex
