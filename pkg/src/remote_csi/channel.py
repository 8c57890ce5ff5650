"""One-ring / LoS channel synthesis and channel covariance matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, linalg

from .geometry import UlaConfig, aoa_and_range

APS_KINDS = ("ring", "discrete", "los")
QUAD_EPSABS = 1e-9
QUAD_EPSREL = 1e-7
DEFAULT_NUM_SCATTERERS = 100


class FarFieldError(ValueError):
    """Far-field synthesis requested for a near-field configuration."""


class DegeneratePathError(ValueError):
    """A scatterer coincides with an antenna element."""


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved abs error {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class RingModel:
    """Scatterer ring around the terminal, as seen from one site.

    Angles of arrival are ``mean_aoa + angular_spread * sin(psi - mean_aoa)`` for a
    scatterer at ring position ``psi``; with ``psi`` uniform this reproduces the
    arcsine density ``aps_ring``. ``scatterer_angles=None`` redraws ring positions
    for every snapshot (continuous ring); an explicit tuple fixes them.
    """

    mean_aoa: float
    angular_spread: float
    distance: float
    radius: float = 0.0
    center: tuple[float, float] | None = None
    num_scatterers: int = DEFAULT_NUM_SCATTERERS
    scatterer_angles: tuple[float, ...] | None = None
    aps_kind: str = "ring"
    visibility: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.aps_kind not in APS_KINDS:
            raise ValueError(f"aps_kind must be one of {APS_KINDS}")
        if self.radius < 0 or self.angular_spread < 0:
            raise ValueError("radius and angular_spread must be non-negative")
        if self.aps_kind == "los" and (self.radius != 0 or self.angular_spread != 0):
            raise ValueError("los model requires zero radius and angular spread")
        if self.scatterer_angles is not None:
            object.__setattr__(self, "scatterer_angles", tuple(float(a) for a in self.scatterer_angles))
            object.__setattr__(self, "num_scatterers", len(self.scatterer_angles))

    @classmethod
    def from_geometry(cls, site, terminal, radius: float, num_scatterers: int = DEFAULT_NUM_SCATTERERS,
                      **kwargs) -> "RingModel":
        theta, dist = aoa_and_range(site, terminal)
        if radius >= dist:
            raise ValueError("ring radius must be smaller than the site distance")
        kind = kwargs.pop("aps_kind", "ring" if kwargs.get("scatterer_angles") is None else "discrete")
        return cls(theta, float(np.arcsin(radius / dist)), dist, radius, tuple(map(float, terminal)),
                   num_scatterers, aps_kind=kind, **kwargs)

    @classmethod
    def los(cls, site, terminal) -> "RingModel":
        theta, dist = aoa_and_range(site, terminal)
        return cls(theta, 0.0, dist, 0.0, tuple(map(float, terminal)), 1, aps_kind="los")

    @property
    def is_los(self) -> bool:
        return self.aps_kind == "los" or self.angular_spread == 0.0

    def gain(self, wavelength: float) -> float:
        """Friis amplitude ``lambda / (4 pi D)``."""
        return wavelength / (4 * np.pi * self.distance)

    def with_(self, **changes) -> "RingModel":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class ChannelSnapshot:
    site_id: str
    values: np.ndarray
    clean: np.ndarray
    sounding_index: int = 0


@dataclass
class HermitianCovariance:
    matrix: np.ndarray
    provenance: str
    num_samples: int | None = None

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= tol)

    def is_psd(self, rel_tol: float = 1e-9) -> bool:
        w = np.linalg.eigvalsh(self.matrix)
        return bool(w.min() >= -rel_tol * abs(np.trace(self.matrix).real))


def aps_ring(gamma, theta: float, gamma_max: float):
    """Scatterer angular density on a continuous ring, ``2 / sqrt(gmax^2 - (gamma - theta)^2)``.

    Zero outside the open support ``|gamma - theta| < gamma_max``.
    """
    u = np.asarray(gamma, dtype=float) - theta
    inside = np.abs(u) < gamma_max
    out = np.zeros_like(u)
    out[inside] = 2.0 / np.sqrt(gamma_max**2 - u[inside] ** 2)
    return out if out.ndim else float(out)


def _visibility_mean(model: RingModel) -> float:
    """Mean of p(gamma) under the ring density (1 when p is constant)."""
    if model.visibility is None or model.is_los:
        return 1.0
    f = lambda u: float(model.visibility(np.asarray(model.angular_spread * np.sin(u))))
    val, _ = integrate.quad(f, -np.pi / 2, np.pi / 2, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL)
    return val / np.pi


def aps_power(model: RingModel, gamma, wavelength: float):
    """Power APS ``S^2(gamma)`` over AoA offsets, normalized so it integrates to ``g^2``.

    The power density is proportional to the scatterer density times visibility.
    """
    gmax = model.angular_spread
    mu = aps_ring(gamma, 0.0, gmax)
    p = 1.0 if model.visibility is None else model.visibility(np.asarray(gamma, dtype=float))
    norm = 2 * np.pi * _visibility_mean(model)
    return model.gain(wavelength) ** 2 * mu * p / norm


def _path_offsets(model: RingModel, ring_angles: np.ndarray) -> np.ndarray:
    return model.angular_spread * np.sin(ring_angles - model.mean_aoa)


def _path_weights(model: RingModel, offsets: np.ndarray) -> np.ndarray:
    if model.visibility is None:
        return np.ones_like(offsets)
    return np.sqrt(model.visibility(offsets) / _visibility_mean(model))


def _complex_noise(rng: np.random.Generator, shape, noise_var: float) -> np.ndarray:
    if noise_var == 0:
        return np.zeros(shape, dtype=complex)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * np.sqrt(noise_var / 2)


def _ring_angles(model: RingModel, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    if model.scatterer_angles is not None:
        base = np.asarray(model.scatterer_angles)
        return base if n is None else np.broadcast_to(base, (n, base.size))
    shape = model.num_scatterers if n is None else (n, model.num_scatterers)
    return rng.uniform(0, 2 * np.pi, size=shape)


def path_lengths(model: RingModel, array: UlaConfig, ring_angles: Sequence[float] | None = None) -> np.ndarray:
    """Exact terminal -> scatterer -> element distances, shape ``(K_sc, M)``.

    LoS models return the direct terminal -> element distances with shape ``(1, M)``.
    """
    if model.center is None:
        raise ValueError("exact path lengths need the terminal position (model.center)")
    elems = array.element_positions()
    term = np.asarray(model.center, dtype=float)
    if model.aps_kind == "los":
        return np.linalg.norm(elems - term, axis=1)[None, :]
    if ring_angles is None:
        ring_angles = model.scatterer_angles
    if ring_angles is None:
        raise ValueError("exact synthesis needs explicit scatterer angles")
    psi = np.asarray(ring_angles, dtype=float)
    scat = term + model.radius * np.stack([np.cos(psi), np.sin(psi)], axis=1)
    xi_t = np.linalg.norm(scat - term, axis=1)
    xi_e = np.linalg.norm(scat[:, None, :] - elems[None, :, :], axis=2)
    if xi_e.size and xi_e.min() < 1e-9:
        raise DegeneratePathError("scatterer coincides with an antenna element")
    return xi_t[:, None] + xi_e


def synth_exact(model: RingModel, array: UlaConfig, tx_power: float, noise_var: float,
                phases: Sequence[float] | None = None, seed=None, *, ring_angles=None,
                site_id: str = "lc0", sounding_index: int = 0) -> ChannelSnapshot:
    """Snapshot with exact per-element path lengths and Friis gains per path.

    Each path carries amplitude ``lambda / (4 pi d_ki) / sqrt(K_sc)`` and phase
    ``-2 pi d_ki / lambda + phi_k``.
    """
    rng = np.random.default_rng(seed)
    lam = array.wavelength
    m = array.num_elements
    if model.num_scatterers == 0 and model.aps_kind != "los":
        clean = np.zeros(m, dtype=complex)
    else:
        if ring_angles is None and model.aps_kind != "los":
            ring_angles = _ring_angles(model, rng)
        d = path_lengths(model, array, ring_angles)
        k = d.shape[0]
        if phases is None:
            phases = np.zeros(k) if model.aps_kind == "los" else rng.uniform(0, 2 * np.pi, k)
        phases = np.asarray(phases, dtype=float)
        amp = lam / (4 * np.pi * d) / np.sqrt(k)
        if model.aps_kind != "los":
            amp = amp * _path_weights(model, _path_offsets(model, np.asarray(ring_angles)))[:, None]
        h = np.sum(amp * np.exp(-2j * np.pi * d / lam + 1j * phases[:, None]), axis=0)
        clean = np.sqrt(tx_power) * h
    noise = _complex_noise(rng, m, noise_var)
    return ChannelSnapshot(site_id, clean + noise, clean, sounding_index)


def _check_far_field(model: RingModel, array: UlaConfig, force: bool) -> None:
    if not force and not array.is_far_field(model.distance, model.radius):
        raise FarFieldError(
            f"distance {model.distance:.3g} m is not in the far field of this array "
            f"(Rayleigh {array.rayleigh_distance:.3g} m, ring {model.radius:.3g} m); pass force=True"
        )


def farfield_batch(model: RingModel, array: UlaConfig, tx_power: float, noise_var: float,
                   num_samples: int, seed=None, *, phases: Sequence[float] | None = None,
                   force: bool = False, chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """``num_samples`` far-field snapshots as arrays ``(values, clean)`` of shape ``(K, M)``.

    Ring positions (continuous ring) and path phases are redrawn per snapshot unless
    fixed by the model or by ``phases``.
    """
    _check_far_field(model, array, force)
    rng = np.random.default_rng(seed)
    m = array.num_elements
    idx = np.arange(m)
    k_scale = 2 * np.pi * array.spacing / array.wavelength
    amp0 = model.gain(array.wavelength) * np.sqrt(tx_power)
    clean = np.empty((num_samples, m), dtype=complex)
    for start in range(0, num_samples, chunk):
        n = min(chunk, num_samples - start)
        if model.is_los and model.aps_kind == "los":
            gam = np.full((n, 1), model.mean_aoa)
            w = np.ones((n, 1))
        else:
            psi = _ring_angles(model, rng, n)
            off = _path_offsets(model, psi)
            gam = model.mean_aoa + off
            w = _path_weights(model, off) / np.sqrt(gam.shape[1])
        ks = gam.shape[1]
        if phases is None:
            ph = rng.uniform(0, 2 * np.pi, size=(n, ks))
        else:
            ph = np.broadcast_to(np.asarray(phases, dtype=float), (n, ks))
        coef = amp0 * w * np.exp(1j * ph)
        steer = np.exp(-1j * k_scale * np.cos(gam - array.boresight)[:, :, None] * idx)
        clean[start:start + n] = np.einsum("nk,nkm->nm", coef, steer)
    noise = _complex_noise(rng, (num_samples, m), noise_var)
    return clean + noise, clean


def synth_farfield(model: RingModel, array: UlaConfig, tx_power: float, noise_var: float,
                   phases: Sequence[float] | None = None, seed=None, *, force: bool = False,
                   site_id: str = "lc0", sounding_index: int = 0) -> ChannelSnapshot:
    """One far-field snapshot: equal path gains ``g / sqrt(K_sc)`` and plane-wave phases."""
    values, clean = farfield_batch(model, array, tx_power, noise_var, 1, seed, phases=phases, force=force)
    return ChannelSnapshot(site_id, values[0], clean[0], sounding_index)


def synthesize_snapshots(model: RingModel, array: UlaConfig, tx_power: float, noise_var: float,
                         num_samples: int, master_seed: int = 0, *, site_id: str = "lc0",
                         phases=None, force: bool = False) -> list[ChannelSnapshot]:
    """Snapshots ``k = 0..K-1``, each seeded from ``(master_seed, k)``."""
    out = []
    for k in range(num_samples):
        snap = synth_farfield(model, array, tx_power, noise_var, phases, seed=[master_seed, k],
                              force=force, site_id=site_id, sounding_index=k)
        out.append(snap)
    return out


def _ring_row(model: RingModel, array: UlaConfig, form: str) -> np.ndarray:
    """First column ``r_n`` (n = m - l >= 0) of the unit-power covariance."""
    m = array.num_elements
    theta = model.mean_aoa - array.boresight
    gmax = model.angular_spread
    kd = 2 * np.pi * array.spacing / array.wavelength
    if model.is_los:
        return np.exp(-1j * kd * np.arange(m) * np.cos(theta))
    pbar = _visibility_mean(model)
    vis = model.visibility

    def weight(u):
        return 1.0 if vis is None else float(vis(np.asarray(gmax * np.sin(u)))) / pbar

    row = np.empty(m, dtype=complex)
    row[0] = 1.0
    for n in range(1, m):
        if form == "exact":
            phase = lambda u, n=n: -kd * n * np.cos(theta + gmax * np.sin(u))
            pre = 1.0
        else:
            phase = lambda u, n=n: kd * n * np.sin(theta) * gmax * np.sin(u)
            pre = np.exp(-1j * kd * n * np.cos(theta))
        parts = []
        for fn in (np.cos, np.sin):
            res = integrate.quad(lambda u: weight(u) * fn(phase(u)), -np.pi / 2, np.pi / 2,
                                 epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200, full_output=1)
            val, err = res[0], res[1]
            if len(res) == 4 and err > 10 * max(QUAD_EPSABS, QUAD_EPSREL * abs(val)):
                raise QuadratureError(f"covariance lag {n} did not converge", err)
            parts.append(val / np.pi)
        row[n] = pre * (parts[0] + 1j * parts[1])
    return row


def covariance_analytic(model: RingModel, array: UlaConfig, tx_power: float, noise_var: float,
                        form: str = "exact") -> HermitianCovariance:
    """Channel covariance ``P * int S^2(g) exp(-j 2 pi delta (m-l) cos(g + theta) / lambda) dg + s2 I``.

    ``form="exact"`` integrates the full phase; ``form="small-angle"`` uses the
    first-order expansion ``cos(theta + g) ~ cos(theta) - g sin(theta)``. Both use the
    substitution ``g = gamma_max sin(u)``, which removes the endpoint singularity.
    """
    if form not in ("exact", "small-angle"):
        raise ValueError("form must be 'exact' or 'small-angle'")
    row = _ring_row(model, array, form)
    power = tx_power * model.gain(array.wavelength) ** 2
    c = power * linalg.toeplitz(row, row.conj())
    c[np.diag_indices_from(c)] = power + noise_var
    return HermitianCovariance(c, "analytic")


def covariance_sampled(snapshots: Sequence[ChannelSnapshot] | np.ndarray) -> HermitianCovariance:
    """``(1/K) sum_k y(k) y(k)^H``."""
    if isinstance(snapshots, np.ndarray):
        y = np.atleast_2d(snapshots)
    else:
        if len(snapshots) == 0:
            raise ValueError("need at least one snapshot")
        y = np.stack([s.values for s in snapshots])
    if y.shape[0] == 0:
        raise ValueError("need at least one snapshot")
    c = y.T @ y.conj() / y.shape[0]
    c = 0.5 * (c + c.conj().T)
    return HermitianCovariance(c, "sampled", y.shape[0])
