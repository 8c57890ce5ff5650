import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from remote_csi.geometry import (
    DegenerateGeometryError,
    NoIntersectionError,
    SiteLayout,
    UlaConfig,
    aoa_and_range,
    remote_aoa_jacobian,
    remote_aoa_jacobian_one_site,
    remote_aoa_jacobian_two_site,
    remote_aoa_one_site,
    remote_aoa_two_site,
    steering_vector,
    triangulated_range,
)

coord = st.floats(-500, 500, allow_nan=False)
point = st.tuples(coord, coord)


def _far(*pts, tol=1.0):
    return all(np.hypot(a[0] - b[0], a[1] - b[1]) > tol for i, a in enumerate(pts) for b in pts[i + 1:])


# --- steering vectors -------------------------------------------------------

def test_steering_broadside_is_flat():
    v = steering_vector(UlaConfig.half_wavelength(4), np.pi / 2)
    np.testing.assert_allclose(v, np.full(4, 0.5), atol=1e-15)


def test_steering_single_element():
    np.testing.assert_allclose(steering_vector(UlaConfig(1, 0.3, 0.1), 1.234), [1.0])


def test_steering_endfire_two_elements():
    v = steering_vector(UlaConfig.half_wavelength(2), 0.0)
    np.testing.assert_allclose(v, np.array([1, -1]) / np.sqrt(2), atol=1e-15)


@given(st.integers(1, 1024), st.floats(0.01, 2.0), st.floats(0.01, 1.0), st.floats(-10, 10))
def test_steering_unit_norm(m, spacing, lam, aoa):
    v = steering_vector(UlaConfig(m, spacing, lam), aoa)
    assert abs(np.linalg.norm(v) - 1) < 1e-12


def test_steering_matches_element_path_lengths():
    # the plane-wave phase at each element equals k times the extra path length
    arr = UlaConfig(8, 0.05, 0.1, origin=(3.0, -2.0), boresight=0.4)
    aoa = 1.1
    far = np.asarray(arr.origin) + 1e7 * np.array([np.cos(aoa), np.sin(aoa)])
    d = np.linalg.norm(far - arr.element_positions(), axis=1)
    exact = np.exp(-2j * np.pi * (d - d[0]) / arr.wavelength) / np.sqrt(8)
    np.testing.assert_allclose(steering_vector(arr, aoa), exact, atol=1e-6)


def test_ula_validation():
    with pytest.raises(ValueError):
        UlaConfig(0, 0.05, 0.1)
    with pytest.raises(ValueError):
        UlaConfig(4, -0.05, 0.1)
    with pytest.raises(ValueError):
        UlaConfig(4, 0.05, 0.0)


def test_far_field_flag():
    arr = UlaConfig.half_wavelength(16, 0.01)  # Rayleigh distance 0.64 m
    assert arr.rayleigh_distance == pytest.approx(2 * 16**2 * 0.005**2 / 0.01)
    assert arr.is_far_field(100.0, 5.0)
    assert not arr.is_far_field(40.0, 5.0)
    assert not arr.is_far_field(0.5, 0.0)


# --- coordinates ------------------------------------------------------------

@pytest.mark.parametrize("site, term, expected", [
    ((0, 0), (0, 100), (np.pi / 2, 100.0)),
    ((0, 0), (100, 0), (0.0, 100.0)),
    ((100, 0), (0, 50), (np.arctan2(50, -100), np.sqrt(12500))),
])
def test_aoa_and_range_examples(site, term, expected):
    th, d = aoa_and_range(site, term)
    assert th == pytest.approx(expected[0], abs=1e-15)
    assert d == pytest.approx(expected[1], rel=1e-15)


@given(point, point)
def test_aoa_and_range_inverts(site, term):
    assume(_far(site, term, tol=1e-3))
    th, d = aoa_and_range(site, term)
    assert -np.pi < th <= np.pi
    np.testing.assert_allclose(np.add(site, d * np.array([np.cos(th), np.sin(th)])), term, atol=1e-9)


def test_aoa_and_range_coincident():
    with pytest.raises(DegenerateGeometryError):
        aoa_and_range((1.0, 2.0), (1.0, 2.0 + 1e-8))


# --- remote AoA maps -------------------------------------------------------

def test_one_site_collinear():
    assert remote_aoa_one_site(100, np.pi / 2, 50, np.pi / 2) == pytest.approx(np.pi / 2)


def test_one_site_due_east():
    assert remote_aoa_one_site(np.sqrt(5000), np.pi / 4, 50, np.pi / 2) == pytest.approx(0.0, abs=1e-12)


def test_one_site_at_remote_raises():
    with pytest.raises(DegenerateGeometryError):
        remote_aoa_one_site(50.0, 0.3, 50.0, 0.3)


def test_two_site_example():
    # locals (0,0),(200,0); remote (100,50); terminal (100,100)
    th0, d0 = aoa_and_range((0, 0), (100, 50))
    got = remote_aoa_two_site(np.pi / 4, 3 * np.pi / 4, 200.0, d0, th0)
    assert got == pytest.approx(np.pi / 2, abs=1e-12)


def test_two_site_terminal_on_baseline():
    # terminal between the locals, remote above it: rays cross at (60, 0)
    th0, d0 = aoa_and_range((0, 0), (100, 50))
    th1, th2 = 0.0, np.pi
    with pytest.raises(NoIntersectionError):
        remote_aoa_two_site(th1, th2, 200.0, d0, th0)
    # slightly off the baseline the answer follows the coordinate oracle
    term = (60.0, 1e-3)
    th1, _ = aoa_and_range((0, 0), term)
    th2, _ = aoa_and_range((200, 0), term)
    expected, _ = aoa_and_range((100, 50), term)
    assert remote_aoa_two_site(th1, th2, 200.0, d0, th0) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(-np.pi / 2 - np.arctan(40 / 50), abs=1e-4)


def test_two_site_parallel():
    with pytest.raises(NoIntersectionError):
        remote_aoa_two_site(0.7, 0.7, 200.0, 50.0, 0.5)
    with pytest.raises(NoIntersectionError):
        triangulated_range(0.7, 0.7, 200.0)


@settings(max_examples=300)
@given(point, point, point)
def test_one_site_matches_coordinates(remote, term, shift):
    local = shift
    assume(_far(local, remote, term))
    th_lc, d_lc = aoa_and_range(local, term)
    th0, d0 = aoa_and_range(local, remote)
    expected, _ = aoa_and_range(remote, term)
    got = remote_aoa_one_site(d_lc, th_lc, d0, th0)
    assert np.angle(np.exp(1j * (got - expected))) == pytest.approx(0, abs=1e-9)


@settings(max_examples=300)
@given(st.floats(10, 400), point, point)
def test_two_site_matches_coordinates(baseline, remote, term):
    assume(_far((0, 0), (baseline, 0), remote, term))
    th1, _ = aoa_and_range((0, 0), term)
    th2, _ = aoa_and_range((baseline, 0), term)
    assume(abs(np.sin(th2 - th1)) > 1e-3)
    th0, d0 = aoa_and_range((0, 0), remote)
    expected, _ = aoa_and_range(remote, term)
    got = remote_aoa_two_site(th1, th2, baseline, d0, th0)
    assert np.angle(np.exp(1j * (got - expected))) == pytest.approx(0, abs=1e-9)
    assert triangulated_range(th1, th2, baseline) == pytest.approx(np.hypot(*term), rel=1e-9)


def test_random_layouts_agree_in_bulk():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10_000):
        local2 = (rng.uniform(50, 300), 0.0)
        remote, term = rng.uniform(-200, 200, 2), rng.uniform(-200, 200, 2)
        if not _far((0, 0), local2, remote, term):
            continue
        th1, d1 = aoa_and_range((0, 0), term)
        th2, _ = aoa_and_range(local2, term)
        if abs(np.sin(th2 - th1)) < 1e-3:
            continue
        th0, d0 = aoa_and_range((0, 0), remote)
        expected, _ = aoa_and_range(remote, term)
        for got in (remote_aoa_one_site(d1, th1, d0, th0), remote_aoa_two_site(th1, th2, local2[0], d0, th0)):
            worst = max(worst, abs(np.angle(np.exp(1j * (got - expected)))))
    assert worst < 1e-9


# --- Jacobians --------------------------------------------------------------

def _fd(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * max(1.0, abs(x[i]))
        out.append((f(x + e) - f(x - e)) / (2 * e[i]))
    return np.array(out)


def test_jacobian_one_site_zero_when_aligned():
    j = remote_aoa_jacobian_one_site(120.0, 0.8, 50.0, 0.8)
    assert j[0] == pytest.approx(0.0, abs=1e-15)


def test_jacobian_collocated_sites():
    j = remote_aoa_jacobian_one_site(120.0, 0.8, 0.0, 0.3)
    assert j[1] ** 2 == pytest.approx(1.0)


def test_jacobian_one_site_squares_match_closed_form():
    d, th, d0, th0 = 130.0, 0.9, 60.0, 0.4
    d_rm2 = d**2 + d0**2 - 2 * d * d0 * np.cos(th0 - th)
    j = remote_aoa_jacobian_one_site(d, th, d0, th0)
    assert j[0] ** 2 == pytest.approx(d0**2 * np.sin(th0 - th) ** 2 / d_rm2**2, rel=1e-12)
    assert j[1] ** 2 == pytest.approx(d**2 * (d - d0 * np.cos(th0 - th)) ** 2 / d_rm2**2, rel=1e-12)


@settings(max_examples=200)
@given(st.floats(20, 300), st.floats(-3, 3), st.floats(5, 200), st.floats(-3, 3))
def test_jacobian_one_site_finite_differences(d, th, d0, th0):
    d_rm2 = d**2 + d0**2 - 2 * d * d0 * np.cos(th0 - th)
    assume(d_rm2 > 25.0)
    j = remote_aoa_jacobian_one_site(d, th, d0, th0)
    # difference around the base value so the atan2 branch cut cannot leak in
    base = remote_aoa_one_site(d, th, d0, th0)
    fd = _fd(lambda z: np.angle(np.exp(1j * (remote_aoa_one_site(z[0], z[1], d0, th0) - base))), [d, th])
    np.testing.assert_allclose(j, fd, rtol=1e-5, atol=1e-9 * np.abs(j).max())


@settings(max_examples=200)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(50, 300), st.floats(5, 200), st.floats(-3, 3))
def test_jacobian_two_site_finite_differences(t1, t2, baseline, d0, th0):
    assume(abs(np.sin(t2 - t1)) > 1e-3)
    d1 = triangulated_range(t1, t2, baseline)
    assume(d1 > 0)
    term = d1 * np.array([np.cos(t1), np.sin(t1)])
    rem = d0 * np.array([np.cos(th0), np.sin(th0)])
    assume(np.linalg.norm(term - rem) > 5.0 and d1 < 5e3)
    base = remote_aoa_two_site(t1, t2, baseline, d0, th0)
    f = lambda z: np.angle(np.exp(1j * (remote_aoa_two_site(z[0], z[1], baseline, d0, th0) - base)))
    j = remote_aoa_jacobian_two_site(t1, t2, baseline, d0, th0)
    np.testing.assert_allclose(j, _fd(f, [t1, t2], h=1e-7), rtol=1e-5, atol=1e-7 * np.abs(j).max())


def test_jacobian_dispatch():
    p = dict(d_lc=100.0, theta_lc=1.0, d0=50.0, theta0=0.5)
    np.testing.assert_array_equal(remote_aoa_jacobian(p, "one-site"), remote_aoa_jacobian_one_site(**p))
    with pytest.raises(ValueError):
        remote_aoa_jacobian(p, "three-site")


# --- SiteLayout -------------------------------------------------------------

def test_layout_derived_quantities():
    lay = SiteLayout(((-100, 0), (100, 0)), (0, 50), (30, 90))
    th, d = lay.local(0)
    assert d == pytest.approx(np.hypot(130, 90))
    assert lay.baseline == 200.0
    assert lay.is_canonical_pair()
    fr = lay.two_site_frame()
    assert fr["rotation"] == 0.0
    got = remote_aoa_two_site(fr["theta_lc"], fr["theta_lc2"], fr["baseline"], fr["d0"], fr["theta0"])
    assert got == pytest.approx(lay.remote()[0], abs=1e-12)


def test_layout_rotated_frame():
    rot = 0.7
    R = np.array([[np.cos(rot), -np.sin(rot)], [np.sin(rot), np.cos(rot)]])
    pts = [R @ p for p in (np.array([0, 0.0]), np.array([200, 0.0]), np.array([90, 40.0]), np.array([130, 120.0]))]
    lay = SiteLayout((tuple(pts[0]), tuple(pts[1])), tuple(pts[2]), tuple(pts[3]))
    assert not lay.is_canonical_pair()
    fr = lay.two_site_frame()
    assert fr["rotation"] == pytest.approx(rot)
    got = remote_aoa_two_site(fr["theta_lc"], fr["theta_lc2"], fr["baseline"], fr["d0"], fr["theta0"]) + rot
    assert np.angle(np.exp(1j * (got - lay.remote()[0]))) == pytest.approx(0, abs=1e-12)


def test_layout_rejects_terminal_at_site():
    with pytest.raises(DegenerateGeometryError):
        SiteLayout(((0, 0),), (0, 50), (0, 50))
    with pytest.raises(ValueError):
        SiteLayout((), (0, 50), (10, 10))
