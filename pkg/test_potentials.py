import math

import numpy as np
import pytest

from errors import InvalidArgumentError
from potentials import (
    S3,
    Family,
    Potential,
    check_admissible,
    dilate_potential,
    evaluate_v,
    evaluate_vhat,
    lp_norm,
    make_potential,
    parse_potential,
    potential_from_dict,
    scale_potential,
    vhat_by_quadrature,
    vhat_nonpositive,
    weighted_l1_norm,
)

CATALOG = [("gaussian", 1.0, 1.0), ("exponential", 0.7, 1.3), ("squarewell", 1.0, 1.0)]


def test_closed_form_norms_match_quadrature():
    for family, depth, range_ in CATALOG:
        pot = make_potential(family, depth, range_)
        for q, key in ((1, "l1"), (1.5, "l32")):
            direct = lp_norm(pot, q)
            assert abs(direct - pot.cached_norms[key]) <= 1e-10 * pot.cached_norms[key], (family, key)
        weighted = weighted_l1_norm(pot)
        assert abs(weighted - pot.cached_norms["l1_weighted"]) <= 1e-10 * weighted


def test_gaussian_l32_norm_is_four_pi_over_three():
    pot = make_potential("gaussian", 1.0, 1.0)
    assert abs(lp_norm(pot, 1.5) - 4.0 * math.pi / 3.0) <= 1e-10


def test_norms_are_homogeneous_in_depth():
    base = make_potential("exponential", 1.0, 1.0)
    double = make_potential("exponential", 2.0, 1.0)
    for q in (1, 1.5):
        assert abs(lp_norm(double, q) - 2.0 * lp_norm(base, q)) <= 1e-12 * lp_norm(double, q)


def test_sobolev_threshold_for_gaussian():
    assert S3 == pytest.approx(5.4779, abs=1e-4)
    assert make_potential("gaussian", 1.3, 1.0).cached_norms["l32"] < S3
    assert make_potential("gaussian", 1.31, 1.0).cached_norms["l32"] > S3


def test_closed_form_transform_matches_sine_transform():
    for family, depth, range_ in CATALOG:
        pot = make_potential(family, depth, range_)
        scale = abs(float(pot.vhat(0.0)))
        for p in (0.0, 0.5, 1.0, 3.0):
            assert abs(vhat_by_quadrature(pot, p) - float(pot.vhat(p))) <= 1e-8 * scale, (family, p)


def test_catalog_transforms_at_origin():
    assert float(make_potential("gaussian", 1.0, 1.0).vhat(0.0)) == pytest.approx(-1.0, rel=1e-15)
    expected = -8.0 * math.pi * (2.0 * math.pi) ** -1.5
    assert float(make_potential("exponential", 1.0, 1.0).vhat(0.0)) == pytest.approx(expected, rel=1e-15)
    square = make_potential("squarewell", 1.0, 1.0)
    assert float(square.vhat(1e-6)) == pytest.approx(-(2.0 * math.pi) ** -1.5 * 4.0 * math.pi / 3.0, rel=1e-10)


def test_vhat_sign_check():
    assert vhat_nonpositive(make_potential("gaussian", 1.0, 1.0))
    assert vhat_nonpositive(make_potential("exponential", 1.0, 1.0))
    assert not vhat_nonpositive(make_potential("squarewell", 1.0, 1.0))


def test_scaling_keeps_l32_and_dilation_keeps_l1():
    pot = make_potential("gaussian", 1.0, 1.0)
    for mu in (0.25, 0.04):
        scaled = scale_potential(pot, mu)
        assert scaled.depth == pytest.approx(1.0 / mu)
        assert scaled.range_ == pytest.approx(math.sqrt(mu))
        assert scaled.cached_norms["l32"] == pytest.approx(pot.cached_norms["l32"], rel=1e-12)
        dilated = dilate_potential(pot, mu)
        assert dilated.cached_norms["l1"] == pytest.approx(pot.cached_norms["l1"], rel=1e-12)
    assert scale_potential(pot, 1.0) == pot


def test_parse_and_round_trip():
    pot = parse_potential("exp:0.5:2")
    assert pot.family is Family.EXPONENTIAL
    assert potential_from_dict(pot.to_dict()) == pot
    for bad in ("gaussian:1", "cubic:1:1", "gaussian:x:1", "gaussian:-1:1", "gaussian:1:0"):
        with pytest.raises(InvalidArgumentError):
            parse_potential(bad)


def test_invalid_arguments():
    with pytest.raises(InvalidArgumentError):
        make_potential("gaussian", 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        lp_norm(make_potential("gaussian", 1.0, 1.0), 2)
    with pytest.raises(InvalidArgumentError):
        evaluate_v(make_potential("gaussian", 1.0, 1.0), np.array([-1.0, 1.0]))
    with pytest.raises(InvalidArgumentError):
        evaluate_vhat(make_potential("gaussian", 1.0, 1.0), -0.5)
    with pytest.raises(InvalidArgumentError):
        scale_potential(make_potential("gaussian", 1.0, 1.0), 0.0)


def test_zero_depth_is_the_free_case():
    free = Potential(Family.GAUSSIAN, 0.0, 1.0)
    assert lp_norm(free, 1) == 0.0
    assert np.all(free.v(np.linspace(0.0, 3.0, 7)) == 0.0)


def test_admissibility_report():
    report = check_admissible(make_potential("gaussian", 1.0, 1.0))
    assert report.admissible
    assert report.scattering_length < 0.0

    square = check_admissible(make_potential("squarewell", 1.0, 1.0))
    assert not square.vhat_nonpositive
    assert not square.admissible

    deep = check_admissible(make_potential("gaussian", 2.0, 1.0))
    assert not deep.sobolev_ok
    assert not deep.bs_spectrum_ok
    assert not deep.admissible


def main():
    print("--- Starting Potentials Test Suite ---")
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        print(f"\n--- {name} ---")
        fn()
        print("ok")
    print("\n--- All potentials tests passed ---")


if __name__ == "__main__":
    main()
