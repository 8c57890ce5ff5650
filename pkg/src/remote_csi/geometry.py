"""Planar site geometry, ULA steering vectors and remote-AoA triangulation maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

POSITION_EPS = 1e-6
PARALLEL_EPS = 1e-12


class DegenerateGeometryError(ValueError):
    """Two points that must be distinct coincide (within ``POSITION_EPS``)."""


class NoIntersectionError(ValueError):
    """Bearing rays from two local sites are parallel."""


@dataclass(frozen=True)
class UlaConfig:
    """Uniform linear array.

    Element ``i`` sits at ``origin - i * spacing * axis`` where ``axis`` points
    along ``boresight``. With this placement the path length to element ``i``
    grows as ``i * spacing * cos(aoa)``, so the phase progression matches
    :func:`steering_vector`. Element 0 is the phase reference.
    """

    num_elements: int
    spacing: float
    wavelength: float
    origin: tuple[float, float] = (0.0, 0.0)
    boresight: float = 0.0

    def __post_init__(self) -> None:
        if self.num_elements < 1:
            raise ValueError("num_elements must be >= 1")
        if self.spacing <= 0 or self.wavelength <= 0:
            raise ValueError("spacing and wavelength must be positive")

    @classmethod
    def half_wavelength(cls, num_elements: int, wavelength: float = 0.1, **kwargs) -> "UlaConfig":
        return cls(num_elements, wavelength / 2, wavelength, **kwargs)

    @property
    def axis(self) -> np.ndarray:
        return np.array([np.cos(self.boresight), np.sin(self.boresight)])

    def element_positions(self) -> np.ndarray:
        idx = np.arange(self.num_elements)[:, None]
        return np.asarray(self.origin, dtype=float) - idx * self.spacing * self.axis

    @property
    def rayleigh_distance(self) -> float:
        return 2.0 * self.num_elements**2 * self.spacing**2 / self.wavelength

    def is_far_field(self, distance: float, ring_radius: float = 0.0) -> bool:
        """Far-field flag: ``distance > 10 * ring_radius`` and beyond the Rayleigh distance."""
        return bool(distance > 10.0 * ring_radius and distance > self.rayleigh_distance)


def steering_vector(array: UlaConfig, aoa: float) -> np.ndarray:
    """Unit-norm ULA response, ``exp(-j 2 pi i delta cos(aoa) / lambda) / sqrt(M)``.

    ``aoa`` is measured in the global frame; the array boresight is subtracted.
    """
    i = np.arange(array.num_elements)
    phase = -2j * np.pi * i * array.spacing * np.cos(aoa - array.boresight) / array.wavelength
    return np.exp(phase) / np.sqrt(array.num_elements)


def aoa_and_range(site, terminal) -> tuple[float, float]:
    """Bearing in (-pi, pi] and distance from ``site`` to ``terminal``."""
    dx = float(terminal[0]) - float(site[0])
    dy = float(terminal[1]) - float(site[1])
    dist = float(np.hypot(dx, dy))
    if dist < POSITION_EPS:
        raise DegenerateGeometryError(f"points coincide: {site!r}, {terminal!r}")
    return _wrap(np.arctan2(dy, dx)), dist


def remote_aoa_one_site(d_lc: float, theta_lc: float, d0: float, theta0: float) -> float:
    """Remote-site AoA from the local range/bearing to the terminal.

    The local site is at the origin, the remote site at ``d0 * (cos theta0, sin theta0)``.
    """
    y = d_lc * np.sin(theta_lc) - d0 * np.sin(theta0)
    x = d_lc * np.cos(theta_lc) - d0 * np.cos(theta0)
    if np.hypot(x, y) < POSITION_EPS:
        raise DegenerateGeometryError("terminal coincides with the remote site")
    return _wrap(np.arctan2(y, x))


def triangulated_range(theta_lc: float, theta_lc2: float, baseline: float) -> float:
    """Distance from the first local site (origin) to the crossing of both bearing rays.

    The second local site sits at ``(baseline, 0)``.
    """
    s = np.sin(theta_lc2 - theta_lc)
    if abs(s) < PARALLEL_EPS:
        raise NoIntersectionError("bearing rays are parallel")
    return float(baseline * np.sin(theta_lc2) / s)


def remote_aoa_two_site(theta_lc: float, theta_lc2: float, baseline: float, d0: float, theta0: float) -> float:
    """Remote-site AoA from the bearings at two local sites.

    Local sites at the origin and ``(baseline, 0)``. The two-argument arctangent of
    ``baseline sin(t2) sin(t1) - d0 sin(theta0) sin(t2 - t1)`` over
    ``baseline sin(t2) cos(t1) - d0 cos(theta0) sin(t2 - t1)``, with both arguments
    multiplied by ``sign(sin(t2 - t1))`` so the quadrant is right.
    """
    s = np.sin(theta_lc2 - theta_lc)
    if abs(s) < PARALLEL_EPS:
        raise NoIntersectionError("bearing rays are parallel")
    k = baseline * np.sin(theta_lc2)
    y = k * np.sin(theta_lc) - d0 * np.sin(theta0) * s
    x = k * np.cos(theta_lc) - d0 * np.cos(theta0) * s
    if np.hypot(x, y) < POSITION_EPS * abs(s):
        raise DegenerateGeometryError("terminal coincides with the remote site")
    sign = 1.0 if s > 0 else -1.0
    return _wrap(np.arctan2(sign * y, sign * x))


def remote_aoa_jacobian_one_site(d_lc: float, theta_lc: float, d0: float, theta0: float) -> np.ndarray:
    """Partials of the remote AoA w.r.t. ``(d_lc, theta_lc)``.

    Squared, these are ``d0^2 sin^2(theta0 - theta_lc) / d_rm^4`` and
    ``d_lc^2 (d_lc - d0 cos(theta0 - theta_lc))^2 / d_rm^4``.
    """
    x = d_lc * np.cos(theta_lc) - d0 * np.cos(theta0)
    y = d_lc * np.sin(theta_lc) - d0 * np.sin(theta0)
    d_rm2 = x * x + y * y
    if d_rm2 < POSITION_EPS**2:
        raise DegenerateGeometryError("terminal coincides with the remote site")
    d_dist = d0 * np.sin(theta0 - theta_lc) / d_rm2
    d_theta = d_lc * (d_lc - d0 * np.cos(theta0 - theta_lc)) / d_rm2
    return np.array([d_dist, d_theta])


def remote_aoa_jacobian_two_site(
    theta_lc: float, theta_lc2: float, baseline: float, d0: float, theta0: float
) -> np.ndarray:
    """Partials of the two-site remote AoA w.r.t. ``(theta_lc, theta_lc2)``."""
    s = np.sin(theta_lc2 - theta_lc)
    if abs(s) < PARALLEL_EPS:
        raise NoIntersectionError("bearing rays are parallel")
    d_lc = triangulated_range(theta_lc, theta_lc2, baseline)
    dd_dt1 = baseline * np.sin(theta_lc2) * np.cos(theta_lc2 - theta_lc) / s**2
    dd_dt2 = -baseline * np.sin(theta_lc) / s**2
    j_dist, j_theta = remote_aoa_jacobian_one_site(d_lc, theta_lc, d0, theta0)
    return np.array([j_dist * dd_dt1 + j_theta, j_dist * dd_dt2])


def remote_aoa_jacobian(params: dict, mode: str = "one-site") -> np.ndarray:
    """Dispatch on ``mode``; ``params`` holds the keyword arguments of the matching map."""
    if mode == "one-site":
        return remote_aoa_jacobian_one_site(**params)
    if mode == "two-site":
        return remote_aoa_jacobian_two_site(**params)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class SiteLayout:
    """Local sites, remote site and terminal in a common planar frame (meters)."""

    local_sites: tuple[tuple[float, float], ...]
    remote_site: tuple[float, float]
    terminal: tuple[float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "local_sites", tuple(tuple(map(float, p)) for p in self.local_sites))
        object.__setattr__(self, "remote_site", tuple(map(float, self.remote_site)))
        object.__setattr__(self, "terminal", tuple(map(float, self.terminal)))
        if not self.local_sites:
            raise ValueError("at least one local site is required")
        for p in (*self.local_sites, self.remote_site):
            if np.hypot(p[0] - self.terminal[0], p[1] - self.terminal[1]) < POSITION_EPS:
                raise DegenerateGeometryError(f"terminal coincides with site {p}")

    def local(self, index: int = 0) -> tuple[float, float]:
        """(theta_lc, D_lc) seen from local site ``index``."""
        return aoa_and_range(self.local_sites[index], self.terminal)

    def remote(self) -> tuple[float, float]:
        """(theta_rm, D_rm)."""
        return aoa_and_range(self.remote_site, self.terminal)

    def remote_offset(self, index: int = 0) -> tuple[float, float]:
        """(theta0, D0): bearing and distance of the remote site from local site ``index``."""
        return aoa_and_range(self.local_sites[index], self.remote_site)

    @property
    def baseline(self) -> float:
        a, b = self.local_sites[0], self.local_sites[1]
        return float(np.hypot(b[0] - a[0], b[1] - a[1]))

    def is_canonical_pair(self) -> bool:
        """True when the second local site lies on the +x axis of the first."""
        a, b = self.local_sites[0], self.local_sites[1]
        return abs(b[1] - a[1]) < POSITION_EPS and b[0] > a[0]

    def two_site_frame(self) -> dict:
        """Two-site triangulation parameters in the frame where local site 0 is the
        origin and local site 1 lies on the +x axis.

        Returns the keyword arguments of :func:`remote_aoa_two_site` plus ``rotation``,
        the angle to add to frame bearings to get global bearings.
        """
        a, b = np.asarray(self.local_sites[0]), np.asarray(self.local_sites[1])
        rot, baseline = aoa_and_range(a, b)
        th1, _ = self.local(0)
        th2, _ = self.local(1)
        th0, d0 = self.remote_offset(0)
        return dict(
            theta_lc=_wrap(th1 - rot),
            theta_lc2=_wrap(th2 - rot),
            baseline=baseline,
            d0=d0,
            theta0=_wrap(th0 - rot),
            rotation=rot,
        )


def _wrap(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    if -np.pi < angle <= np.pi:
        return float(angle)
    return float(np.pi - np.mod(np.pi - angle, 2 * np.pi))
