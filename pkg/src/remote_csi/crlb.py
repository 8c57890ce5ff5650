"""Fisher information and Cramer-Rao bounds for local-site parameters and the remote AoA."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .channel import HermitianCovariance, RingModel, covariance_analytic
from .geometry import (
    SiteLayout,
    UlaConfig,
    remote_aoa_jacobian_one_site,
    remote_aoa_jacobian_two_site,
)

PARAM_TAGS = ("g", "gamma_max", "theta_lc", "D_lc", "rho_lc", "tau_lc", "phi")
MAX_CONDITION = 1e12
SIN_EPS = 1e-12


class IllConditionedError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class ParamVector:
    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(set(self.names)) != len(self.names):
            raise ValueError("parameter names must be unique")
        if len(self.names) != len(self.values):
            raise ValueError("names and values differ in length")
        bad = set(self.names) - set(PARAM_TAGS)
        if bad:
            raise ValueError(f"unknown parameter tags {sorted(bad)}")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))


@dataclass
class FisherInfo:
    matrix: np.ndarray
    params: ParamVector | tuple[str, ...]
    num_samples: int

    def crb(self) -> np.ndarray:
        """Diagonal of the inverse FIM."""
        return np.diag(np.linalg.inv(self.matrix))


@dataclass
class CrlbReport:
    """Per-parameter variance bounds; ``inf`` marks an unidentifiable parameter."""

    bounds: dict[str, float]
    mode: str
    fingerprint: dict = field(default_factory=dict)
    extras: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.bounds[key]


def _cho(c: np.ndarray):
    w = np.linalg.eigvalsh(c)
    if w.min() <= 0 or w.max() / w.min() > MAX_CONDITION:
        raise IllConditionedError(f"covariance is singular or ill-conditioned (eigs {w.min():.3g}..{w.max():.3g})")
    return linalg.cho_factor(c, lower=True)


def log_likelihood(cov: HermitianCovariance | np.ndarray, sample_cov: HermitianCovariance | np.ndarray,
                   num_samples: int) -> float:
    """``-K log|C| - K tr(C^-1 C_hat)`` without the additive constant."""
    c = getattr(cov, "matrix", cov)
    chat = getattr(sample_cov, "matrix", sample_cov)
    fac = _cho(c)
    logdet = 2.0 * np.sum(np.log(np.abs(np.diag(fac[0]))))
    tr = np.trace(linalg.cho_solve(fac, chat)).real
    return float(-num_samples * logdet - num_samples * tr)


def fim_from_derivatives(cov: np.ndarray, derivs: Sequence[np.ndarray], num_samples: int) -> np.ndarray:
    """``J_ij = K Re tr(C^-1 D_j C^-1 D_i)``, symmetrized."""
    fac = _cho(cov)
    x = [linalg.cho_solve(fac, d) for d in derivs]
    n = len(x)
    j = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            j[a, b] = j[b, a] = num_samples * np.sum(x[a] * x[b].T).real
    return 0.5 * (j + j.T)


def ring_covariance_fn(model: RingModel, array: UlaConfig, tx_power: float, noise_var: float,
                       names: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Covariance as a function of the parameter values in ``names`` order.

    ``g`` sets the path gain (distance ``lambda / (4 pi g)``), ``D_lc`` the distance,
    ``gamma_max`` the angular spread and ``theta_lc`` the mean AoA.
    """
    lam = array.wavelength

    def cov(z: np.ndarray) -> np.ndarray:
        changes = {}
        for name, v in zip(names, z):
            if name == "g":
                changes["distance"] = lam / (4 * np.pi * v)
            elif name == "D_lc":
                changes["distance"] = v
            elif name == "gamma_max":
                changes["angular_spread"] = abs(v)
            elif name == "theta_lc":
                changes["mean_aoa"] = v
            else:
                raise ValueError(f"{name!r} is not a one-ring covariance parameter")
        kind = model.aps_kind
        if changes.get("angular_spread", model.angular_spread) > 0 and kind == "los":
            changes["aps_kind"] = "ring"
        return covariance_analytic(model.with_(**changes), array, tx_power, noise_var).matrix

    return cov


def _central(f, z: np.ndarray, i: int, h: float) -> np.ndarray:
    e = np.zeros_like(z)
    e[i] = h
    return (f(z + e) - f(z - e)) / (2 * h)


def fim_general(model: RingModel, array: UlaConfig, params: ParamVector, num_samples: int,
                tx_power: float, noise_var: float, step: float = 1e-5) -> FisherInfo:
    """FIM of the zero-mean Gaussian one-ring model.

    Covariance derivatives come from central differences with relative step
    ``step`` and one Richardson refinement, ``(4 D(h/2) - D(h)) / 3``.
    """
    cov_fn = ring_covariance_fn(model, array, tx_power, noise_var, params.names)
    z = np.asarray(params.values, dtype=float)
    c0 = cov_fn(z)
    for attempt in range(2):
        h0 = step * 10.0**-attempt
        try:
            derivs = []
            for i in range(z.size):
                h = h0 * (abs(z[i]) if z[i] != 0 else 1.0)
                d1 = _central(cov_fn, z, i, h)
                d2 = _central(cov_fn, z, i, h / 2)
                derivs.append((4 * d2 - d1) / 3)
            return FisherInfo(fim_from_derivatives(c0, derivs, num_samples), params, num_samples)
        except (IllConditionedError, ValueError):
            if attempt == 1:
                raise
    raise AssertionError("unreachable")


def observed_information(model: RingModel, array: UlaConfig, params: ParamVector,
                         sample_cov: HermitianCovariance | np.ndarray, num_samples: int,
                         tx_power: float, noise_var: float, step: float = 1e-3) -> np.ndarray:
    """Negative Hessian of ``log_likelihood`` at ``params`` by central differences.

    Its expectation over the sample covariance is the FIM, so averaging it over
    independent draws gives a Monte Carlo check of ``fim_general``.
    """
    cov_fn = ring_covariance_fn(model, array, tx_power, noise_var, params.names)
    z = np.asarray(params.values, dtype=float)
    h = step * np.where(z != 0, np.abs(z), 1.0)
    n = z.size

    def ll(dz):
        return log_likelihood(cov_fn(z + dz), sample_cov, num_samples)

    def e(i):
        v = np.zeros(n)
        v[i] = h[i]
        return v

    l0 = ll(np.zeros(n))
    hess = np.empty((n, n))
    for i in range(n):
        hess[i, i] = (ll(e(i)) - 2 * l0 + ll(-e(i))) / h[i] ** 2
        for j in range(i):
            hess[i, j] = hess[j, i] = (ll(e(i) + e(j)) - ll(e(i) - e(j)) - ll(e(j) - e(i))
                                       + ll(-e(i) - e(j))) / (4 * h[i] * h[j])
    return -hess


def fim_los(rho: float, tau: float, phi: float, num_elements: int, noise_var: float,
            num_samples: int) -> FisherInfo:
    """Closed-form FIM over ``[rho, tau, phi]`` for ``y ~ CN(rho e^{j phi} e(tau), s2 I)``.

    ``rho`` is the full array amplitude (includes ``sqrt(M)``), ``e`` is unit norm and
    indexed from 0. ``tau`` and ``phi`` do not enter the entries.
    """
    m, k, s2 = num_elements, num_samples, noise_var
    a = k * rho**2 / s2
    j = np.array([
        [2 * k / s2, 0.0, 0.0],
        [0.0, a * (m - 1) * (2 * m - 1) / 3, a * (m - 1)],
        [0.0, a * (m - 1), 2 * a],
    ])
    return FisherInfo(j, ("rho_lc", "tau_lc", "phi"), k)


def _inf_if(cond: bool, value: Callable[[], float]) -> float:
    return float("inf") if cond else float(value())


def crlb_los_closed_form(distance: float, theta: float, num_elements: int, num_samples: int, *,
                         snr: float | None = None, tx_power: float | None = None,
                         noise_var: float | None = None, wavelength: float | None = None,
                         spacing: float | None = None) -> CrlbReport:
    """LoS bounds on ``rho``, ``tau``, ``D_lc`` and ``theta_lc`` at one local site.

    Either pass ``snr`` (linear, ``P (lambda / 4 pi D)^2 / s2``; half-wavelength
    spacing and unit noise implied) or the physical quantities.
    """
    m, k, d = num_elements, num_samples, distance
    sin2 = np.sin(theta) ** 2
    singular_angle = m < 2 or sin2 < SIN_EPS**2
    if snr is not None:
        s2 = 1.0
        rho2 = m * snr
        crb_d = d**2 / (2 * m * k * snr)
        crb_theta = _inf_if(singular_angle, lambda: 6 / (np.pi**2 * k * snr * m * (m**2 - 1) * sin2))
        fp = dict(distance=d, theta=theta, M=m, K=k, snr=snr)
    else:
        if None in (tx_power, noise_var, wavelength):
            raise ValueError("pass snr or tx_power, noise_var and wavelength")
        spacing = wavelength / 2 if spacing is None else spacing
        s2 = noise_var
        rho2 = tx_power * m * (wavelength / (4 * np.pi * d)) ** 2
        crb_d = 8 * np.pi**2 * d**4 * s2 / (wavelength**2 * k * tx_power * m)
        crb_theta = _inf_if(
            singular_angle,
            lambda: 24 * s2 * d**2 / (k * m * (m**2 - 1) * tx_power * spacing**2 * sin2),
        )
        fp = dict(distance=d, theta=theta, M=m, K=k, tx_power=tx_power, noise_var=s2,
                  wavelength=wavelength, spacing=spacing)
    bounds = {
        "rho_lc": s2 / (2 * k),
        "tau_lc": _inf_if(m < 2, lambda: 6 * s2 / (k * rho2 * (m**2 - 1))),
        "D_lc": crb_d,
        "theta_lc": crb_theta,
    }
    return CrlbReport(bounds, "los-one-site", fp)


def crlb_remote_one_site(layout: SiteLayout, num_elements: int, num_samples: int, snr: float,
                         site: int = 0) -> CrlbReport:
    """Bound on the remote AoA from one local site's LoS CSI.

    ``CRB1 = D_lc^2 / (D_rm^4 K SNR) (M1 + M2)`` with ``M1 = D0^2 sin^2(t0 - t) / (2M)`` and
    ``M2 = 6 (D_lc - D0 cos(t0 - t))^2 / (pi^2 M (M^2 - 1) sin^2 t)``. ``extras["propagated"]``
    holds the same bound assembled from the Jacobian and the per-parameter bounds.
    """
    m, k = num_elements, num_samples
    theta, d_lc = layout.local(site)
    theta0, d0 = layout.remote_offset(site)
    _, d_rm = layout.remote()
    sin2 = np.sin(theta) ** 2
    pre = d_lc**2 / (d_rm**4 * k * snr)
    m1 = 0.5 * d0**2 * np.sin(theta0 - theta) ** 2 / m
    m2 = _inf_if(m < 2 or sin2 < SIN_EPS**2,
                 lambda: 6 / np.pi**2 * (d_lc - d0 * np.cos(theta0 - theta)) ** 2 / (m * (m**2 - 1) * sin2))
    crb1 = pre * (m1 + m2)
    local = crlb_los_closed_form(d_lc, theta, m, k, snr=snr)
    jac = remote_aoa_jacobian_one_site(d_lc, theta, d0, theta0)
    if np.isinf(local["theta_lc"]):
        propagated = float("inf") if jac[1] != 0 else jac[0] ** 2 * local["D_lc"]
    else:
        propagated = jac[0] ** 2 * local["D_lc"] + jac[1] ** 2 * local["theta_lc"]
    fp = dict(local=layout.local_sites[site], remote=layout.remote_site, terminal=layout.terminal,
              M=m, K=k, snr=snr)
    return CrlbReport({"theta_rm": float(crb1)}, "los-one-site", fp,
                      dict(M1=float(pre * m1), M2=float(pre * m2), propagated=float(propagated),
                           D_lc=d_lc, theta_lc=theta, D_rm=d_rm, D0=d0, theta0=theta0))


def crlb_remote_two_site(layout: SiteLayout, num_elements: int, num_samples: int, snr: float) -> CrlbReport:
    """Bound on the remote AoA from the bearings at two local sites (LoS).

    ``bounds["theta_rm"]`` is the closed form
    ``6 D_lc^2 (w1 + w2) / (pi^2 D_rm^4 M (M^2-1) K SNR sin^2(t - t') sin^2 t)``,
    evaluated in the frame where local site 0 is the origin and site 1 lies on +x.
    ``extras["propagated"]`` is the Jacobian of the two-site triangulation map
    applied to each site's bearing bound. ``snr`` refers to local site 0; site 1 sees
    ``snr * (D_lc / D_lc')^2``. Arrays are taken to lie along the baseline.
    """
    m, k = num_elements, num_samples
    fr = layout.two_site_frame()
    t1, t2, t0, d0, base = fr["theta_lc"], fr["theta_lc2"], fr["theta0"], fr["d0"], fr["baseline"]
    _, d_lc = layout.local(0)
    _, d_lc2 = layout.local(1)
    _, d_rm = layout.remote()
    s12 = np.sin(t1 - t2) ** 2
    singular = m < 2 or s12 < SIN_EPS**2 or np.sin(t1) ** 2 < SIN_EPS**2 or np.sin(t2) ** 2 < SIN_EPS**2
    w1 = d0**2 * np.sin(t1) ** 2 * np.sin(t0 - t1) ** 2
    w2 = np.sin(t2) ** 2 * (base * np.sin(t2) - d0 * np.sin(t2 - t0)) ** 2
    crb2 = _inf_if(singular, lambda: 6 * d_lc**2 * (w1 + w2)
                   / (np.pi**2 * d_rm**4 * m * (m**2 - 1) * k * snr * s12 * np.sin(t1) ** 2))
    if singular:
        propagated = float("inf")
    else:
        jac = remote_aoa_jacobian_two_site(t1, t2, base, d0, t0)
        b1 = crlb_los_closed_form(d_lc, t1, m, k, snr=snr)["theta_lc"]
        b2 = crlb_los_closed_form(d_lc2, t2, m, k, snr=snr * (d_lc / d_lc2) ** 2)["theta_lc"]
        propagated = float(jac[0] ** 2 * b1 + jac[1] ** 2 * b2)
    fp = dict(locals=layout.local_sites, remote=layout.remote_site, terminal=layout.terminal,
              M=m, K=k, snr=snr)
    return CrlbReport({"theta_rm": crb2}, "los-two-site", fp,
                      dict(omega1=float(w1), omega2=float(w2), propagated=propagated,
                           D_lc=d_lc, D_lc2=d_lc2, D_rm=d_rm, theta_lc=t1, theta_lc2=t2))


def fit_power_law(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares line through ``(log M, log value)``.

    Returns ``(slope, intercept, rms_residual)``, all in natural-log units.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two points")
    m, v = pts[:, 0], pts[:, 1]
    if np.any(v <= 0) or np.any(m <= 0):
        raise ValueError("power-law fit needs positive M and values")
    if np.unique(m).size != m.size:
        raise ValueError("M values must be distinct")
    x, y = np.log(m), np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))
