"""Closed-form free propagation via hypergeometric cone kernels.

The free solution admits an explicit representation: Fourier modes are
weighted by r-integrals of cone kernels against the flat-space wave
multiplier cos(r |xi|), and the result is assembled by a first-order
co-factor operator.  Writing mu = m / (1 - ell), phi(t) = t^(1-ell)/(1-ell),
D = phi(t) - phi(t0), S = phi(t) + phi(t0), w = S^2 - r^2 and
z = (D^2 - r^2) / w, the two kernels are

    E(r, t; t0; m)  = 2^(2 i mu - 1) (1-ell)^(ell/(1-ell))
                      phi(t0)^((ell + 2 i m)/(1-ell)) w^(-i mu)
                      F(i mu, i mu; 1; z)
    K1(r, t; m; eps) = 2^(2 i mu) phi(eps)^(2 i mu - 1) w^(-i mu)
                      F(i mu, i mu; 1; z)        (with t0 = eps)

with F the Gauss hypergeometric series.  In the usage domain z lies in
[0, 1) and every power has a positive real base, so the principal branch
is inert.  The module restricts itself to 0 < ell < 1, a0 = 1 and
t / eps <= 50, which keeps z safely below the series guard.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .field import Grid, SpinorField, _derivative_wavenumbers
from .spacetime import Cosmology

__all__ = [
    "Hyp2F1ConvergenceError",
    "KernelDomainError",
    "QuadratureConvergenceError",
    "KernelConsistencyError",
    "hyp2f1",
    "hyp2f1_derivative",
    "KernelEval",
    "kernel_E",
    "kernel_K1",
    "kernel_K1_time_derivative",
    "free_mode_multipliers",
    "free_mode_matrix",
    "apply_K1_operator",
    "apply_G_operator",
    "reconstruct_free",
]

Z_MAX_DEFAULT = 0.95
TIME_RATIO_MAX = 50.0


class Hyp2F1ConvergenceError(ArithmeticError):
    pass


class KernelDomainError(ValueError):
    pass


class QuadratureConvergenceError(ArithmeticError):
    pass


class KernelConsistencyError(ArithmeticError):
    pass


def _cpow(base, exponent) -> np.ndarray:
    """base**exponent for positive real base and complex exponent."""
    base = np.asarray(base, dtype=float)
    if np.any(base <= 0):
        raise KernelDomainError("complex power requires a positive real base")
    return np.exp(np.asarray(exponent, dtype=complex) * np.log(base))


def hyp2f1(a, b, c, z, z_max: float = Z_MAX_DEFAULT, rtol: float = 1e-12,
           max_terms: int = 200_000):
    """Gauss series sum_n (a)_n (b)_n / ((c)_n n!) z^n, vectorized over z.

    Valid for |z| <= z_max < 1; raises outside that disc or when the series
    fails to reach the requested relative tail.
    """
    a = complex(a)
    b = complex(b)
    c = complex(c)
    if c.imag == 0.0 and c.real <= 0.0 and c.real == int(c.real):
        raise KernelDomainError("c must not be a nonpositive integer")
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    q = float(np.max(np.abs(z))) if z.size else 0.0
    if q > z_max:
        raise KernelDomainError(
            f"|z| = {q:.4f} exceeds the series guard z_max = {z_max}"
        )
    total = np.ones_like(z)
    term = np.ones_like(z)
    tail_factor = q / (1.0 - q) if q > 0 else 0.0
    for n in range(max_terms):
        ratio = (a + n) * (b + n) / ((c + n) * (n + 1.0))
        term = term * ratio * z
        total = total + term
        if np.all(np.abs(term) * max(tail_factor, 1.0) <= rtol * np.abs(total)):
            break
    else:
        raise Hyp2F1ConvergenceError(
            f"series did not reach rtol={rtol} within {max_terms} terms "
            f"(max |z| = {q:.4f})"
        )
    return complex(total[0]) if scalar else total


def hyp2f1_derivative(a, b, c, z, **kwargs):
    """d/dz F(a, b; c; z) = (a b / c) F(a+1, b+1; c+1; z)."""
    a = complex(a)
    b = complex(b)
    c = complex(c)
    return (a * b / c) * hyp2f1(a + 1, b + 1, c + 1, z, **kwargs)


@dataclass(frozen=True)
class KernelEval:
    """Kernel evaluation context: background, mass and initial time."""

    cosmology: Cosmology
    m: complex
    epsilon: float = 1.0

    def __post_init__(self):
        ell = self.cosmology.ell
        if not 0.0 < ell < 1.0:
            raise KernelDomainError("kernel formulas require 0 < ell < 1")
        if abs(self.cosmology.a0 - 1.0) > 1e-12:
            raise KernelDomainError("kernel formulas require a0 = 1")
        if not self.epsilon > 0:
            raise KernelDomainError("epsilon must be positive")

    @property
    def mu(self) -> complex:
        return complex(self.m) / (1.0 - self.cosmology.ell)

    def with_mass(self, m: complex) -> "KernelEval":
        return KernelEval(self.cosmology, m, self.epsilon)

    def check_time(self, t: float, t0: float | None = None) -> None:
        t0 = self.epsilon if t0 is None else t0
        if t < t0:
            raise KernelDomainError("kernels require t >= t0")
        if t / t0 > TIME_RATIO_MAX * (1.0 + 1e-12):
            raise KernelDomainError(
                f"t/t0 = {t / t0:.1f} exceeds the supported ratio "
                f"{TIME_RATIO_MAX} (series argument too close to 1)"
            )


def _cone_geometry(ke: KernelEval, r, t: float, t0: float):
    phi = ke.cosmology.phi
    pt, p0 = phi(t), phi(t0)
    r = np.asarray(r, dtype=float)
    upper = pt - p0
    if np.any(r < -1e-14) or np.any(r > upper * (1.0 + 1e-12) + 1e-14):
        raise KernelDomainError("r must lie in [0, phi(t) - phi(t0)]")
    num = (pt - p0) ** 2 - r**2
    den = (pt + p0) ** 2 - r**2
    z = np.clip(num / den, 0.0, None)
    return pt, p0, num, den, z


def kernel_E(r, t: float, t0: float, ke: KernelEval):
    """Source-propagator kernel E(r, t; t0; m); vectorized over r."""
    ke.check_time(t, t0)
    ell = ke.cosmology.ell
    mu = ke.mu
    _, p0, _, den, z = _cone_geometry(ke, r, t, t0)
    pref = (
        _cpow(2.0, 2j * mu - 1.0)
        * _cpow(1.0 - ell, ell / (1.0 - ell))
        * _cpow(p0, (ell + 2j * complex(ke.m)) / (1.0 - ell))
    )
    return pref * _cpow(den, -1j * mu) * hyp2f1(1j * mu, 1j * mu, 1.0, z)


def kernel_K1(r, t: float, ke: KernelEval):
    """Cauchy-data kernel K1(r, t; m; eps); vectorized over r."""
    ke.check_time(t)
    mu = ke.mu
    _, p0, _, den, z = _cone_geometry(ke, r, t, ke.epsilon)
    pref = _cpow(2.0, 2j * mu) * _cpow(p0, 2j * mu - 1.0)
    return pref * _cpow(den, -1j * mu) * hyp2f1(1j * mu, 1j * mu, 1.0, z)


def kernel_K1_time_derivative(r, t: float, ke: KernelEval):
    """Partial derivative of K1 with respect to t at fixed r."""
    ke.check_time(t)
    mu = ke.mu
    pt, p0, num, den, z = _cone_geometry(ke, r, t, ke.epsilon)
    dphi = ke.cosmology.dphi(t)
    pref = _cpow(2.0, 2j * mu) * _cpow(p0, 2j * mu - 1.0)
    f = hyp2f1(1j * mu, 1j * mu, 1.0, z)
    fp = hyp2f1_derivative(1j * mu, 1j * mu, 1.0, z)
    dden = 2.0 * (pt + p0) * dphi
    dz = 2.0 * dphi * ((pt - p0) * den - num * (pt + p0)) / den**2
    w_pow = _cpow(den, -1j * mu)
    return pref * w_pow * ((-1j * mu) * dden / den * f + fp * dz)


@lru_cache(maxsize=64)
def _gl_rule(panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mids[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _cos_integrals(
    fvals_fn,
    upper: float,
    xi_abs: np.ndarray,
    abs_tol: float = 1e-10,
    order: int = 16,
    max_panels: int = 1 << 14,
):
    """Integrals of f_k(r) cos(r xi) over [0, upper] for each xi.

    `fvals_fn(r)` returns a tuple of complex arrays sampled at the nodes.
    Panels double until two successive composite rules agree to abs_tol.
    """
    if upper <= 0.0:
        probe = fvals_fn(np.array([0.0]))
        return tuple(np.zeros(xi_abs.shape, dtype=complex) for _ in probe)
    xi_max = float(np.max(xi_abs)) if xi_abs.size else 0.0
    panels = max(4, int(np.ceil(upper * xi_max / (2.0 * np.pi))))
    prev = None
    while panels <= max_panels:
        nodes01, weights01 = _gl_rule(panels, order)
        r = upper * nodes01
        w = upper * weights01
        fvals = fvals_fn(r)
        cos_mat = np.cos(np.outer(r, xi_abs))
        out = tuple((w * fk) @ cos_mat for fk in fvals)
        if prev is not None:
            change = max(
                float(np.max(np.abs(o - p))) if o.size else 0.0
                for o, p in zip(out, prev)
            )
            if change <= abs_tol:
                return out
        prev = out
        panels *= 2
    raise QuadratureConvergenceError(
        f"cos-integral did not converge to {abs_tol} within {max_panels} panels"
    )


def _k1_prefactor(ke: KernelEval) -> complex:
    ell = ke.cosmology.ell
    eps = ke.epsilon
    return complex(
        -1j * _cpow(eps, 1.0 + 0.5 * ell - 1j * complex(ke.m)) / (1.0 - ell)
    )


def free_mode_multipliers(ke: KernelEval, t: float, xi_abs: np.ndarray,
                          abs_tol: float = 1e-10):
    """Per-|xi| Cauchy multipliers and their time derivatives for +/-m.

    Returns (kp, kdp, km, kdm): the mode multiplier kappa(t; m, |xi|), its
    d/dt (boundary term plus differentiated integrand), and the same pair
    for the reflected mass -m.
    """
    ke.check_time(t)
    xi_abs = np.asarray(xi_abs, dtype=float)
    phi = ke.cosmology.phi
    upper = phi(t) - phi(ke.epsilon)
    kp_ctx = ke
    km_ctx = ke.with_mass(-complex(ke.m))

    def fvals(r):
        return (
            kernel_K1(r, t, kp_ctx),
            kernel_K1_time_derivative(r, t, kp_ctx),
            kernel_K1(r, t, km_ctx),
            kernel_K1_time_derivative(r, t, km_ctx),
        )

    i_k_p, i_dk_p, i_k_m, i_dk_m = _cos_integrals(fvals, upper, xi_abs, abs_tol)
    pref_p = _k1_prefactor(kp_ctx)
    pref_m = _k1_prefactor(km_ctx)
    dphi = ke.cosmology.dphi(t)
    if upper > 0.0:
        edge_p = complex(kernel_K1(np.array([upper]), t, kp_ctx)[0])
        edge_m = complex(kernel_K1(np.array([upper]), t, km_ctx)[0])
    else:
        # degenerate interval: K1(0, eps) = phi(eps)^(-1)
        edge_p = edge_m = 1.0 / phi(ke.epsilon)
    cos_edge = np.cos(upper * xi_abs)
    kp = pref_p * i_k_p
    km = pref_m * i_k_m
    kdp = pref_p * (edge_p * cos_edge * dphi + i_dk_p)
    kdm = pref_m * (edge_m * cos_edge * dphi + i_dk_m)
    return kp, kdp, km, kdm


def free_mode_matrix(ke: KernelEval, t: float, xi) -> np.ndarray:
    """4x4 matrix mapping a Fourier coefficient at time eps to time t."""
    xi = np.asarray(xi, dtype=float)
    xi_abs = np.array([float(np.sqrt(np.sum(xi**2)))])
    kp, kdp, km, kdm = free_mode_multipliers(ke, t, xi_abs)
    kp, kdp, km, kdm = kp[0], kdp[0], km[0], kdm[0]
    ell = ke.cosmology.ell
    m = complex(ke.m)
    tp = _cpow(t, 1j * m)
    tm = _cpow(t, -1j * m)
    a_up = 1j * t ** (-0.5 * ell) * tp * kdp
    a_lo = 1j * t ** (-0.5 * ell) * tm * kdm
    b_up = t ** (-1.5 * ell) * tm * km
    b_lo = t ** (-1.5 * ell) * tp * kp
    x1, x2, x3 = (list(xi) + [0.0, 0.0])[:3]
    p = np.array([[x3, x1 - 1j * x2], [x1 + 1j * x2, -x3]], dtype=complex)
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = a_up * np.eye(2)
    out[2:, 2:] = a_lo * np.eye(2)
    out[:2, 2:] = b_up * p
    out[2:, :2] = b_lo * p
    return out


def _unique_mode_magnitudes(grid: Grid):
    ks = _derivative_wavenumbers(grid)
    k2 = np.zeros((grid.n,) * grid.dim)
    for k in ks:
        k2 = k2 + k**2
    mags = np.sqrt(k2).ravel()
    uniq, inverse = np.unique(np.round(mags, 12), return_inverse=True)
    return uniq, inverse.reshape(k2.shape), ks


def apply_K1_operator(values: np.ndarray, grid: Grid, t: float, ke: KernelEval,
                      abs_tol: float = 1e-10) -> np.ndarray:
    """Apply the Cauchy-data integral operator to a scalar field.

    Per Fourier mode the field is multiplied by the prefactor times the
    integral of K1(r, t) cos(r |xi|) over the cone range.
    """
    if grid.dim != 3:
        raise KernelDomainError("the integral operators act on dim = 3 grids")
    ke.check_time(t)
    upper = ke.cosmology.phi(t) - ke.cosmology.phi(ke.epsilon)
    if upper <= 0.0:
        return np.zeros_like(np.asarray(values, dtype=complex))
    uniq, inverse, _ = _unique_mode_magnitudes(grid)

    def fvals(r):
        return (kernel_K1(r, t, ke),)

    (i_k,) = _cos_integrals(fvals, upper, uniq, abs_tol)
    mult = (_k1_prefactor(ke) * i_k)[inverse]
    hat = np.fft.fftn(np.asarray(values, dtype=complex))
    return np.fft.ifftn(mult * hat)


def apply_G_operator(source_fn, grid: Grid, t: float, ke: KernelEval,
                     abs_tol: float = 1e-10, order: int = 16,
                     max_panels: int = 256) -> np.ndarray:
    """Apply the source integral operator to a time-indexed scalar field.

    source_fn(b) returns the scalar field at intermediate time b; the outer
    b-integral uses an adaptive composite Gauss-Legendre rule, the inner
    r-integral the same cos-weighted machinery as the Cauchy operator.
    """
    if grid.dim != 3:
        raise KernelDomainError("the integral operators act on dim = 3 grids")
    ke.check_time(t)
    eps = ke.epsilon
    if t <= eps:
        return np.zeros((grid.n,) * 3, dtype=complex)
    uniq, inverse, _ = _unique_mode_magnitudes(grid)
    phi = ke.cosmology.phi
    ell = ke.cosmology.ell
    m = complex(ke.m)

    def total(panels: int) -> np.ndarray:
        nodes01, weights01 = _gl_rule(panels, order)
        b_nodes = eps + (t - eps) * nodes01
        b_weights = (t - eps) * weights01
        out_hat = np.zeros((grid.n,) * 3, dtype=complex)
        for b, wb in zip(b_nodes, b_weights):
            upper = phi(t) - phi(b)

            def fvals(r, b=b):
                return (kernel_E(r, t, b, ke),)

            (i_e,) = _cos_integrals(fvals, upper, uniq, abs_tol)
            f_hat = np.fft.fftn(np.asarray(source_fn(b), dtype=complex))
            out_hat += wb * complex(_cpow(b, 0.5 * ell - 1j * m)) * i_e[inverse] * f_hat
        return out_hat

    panels = 4
    prev = total(panels)
    while panels <= max_panels:
        panels *= 2
        cur = total(panels)
        if float(np.max(np.abs(cur - prev))) <= abs_tol * grid.n**3:
            prev = cur
            break
        prev = cur
    else:
        raise QuadratureConvergenceError("outer time quadrature did not converge")
    return -2.0 * np.fft.ifftn(prev)


def reconstruct_free(psi1: SpinorField, t: float, ke: KernelEval,
                     abs_tol: float = 1e-10, self_check: bool = True) -> SpinorField:
    """Evaluate the free solution at time t from its data at time eps.

    Every Fourier mode is propagated by the explicit 4x4 mode matrix built
    from the Cauchy multipliers; spatial derivatives act spectrally and the
    time derivative under the integral sign is analytic.  With self_check
    on, the analytic time derivative is audited against a 4th-order central
    difference on a subsample of mode magnitudes.
    """
    grid = psi1.grid
    if grid.dim != 3:
        raise KernelDomainError("reconstruction requires a dim = 3 grid")
    if abs(psi1.time - ke.epsilon) > 1e-9:
        raise KernelDomainError("psi1.time must equal the kernel epsilon")
    ke.check_time(t)
    uniq, inverse, ks = _unique_mode_magnitudes(grid)
    kp, kdp, km, kdm = free_mode_multipliers(ke, t, uniq, abs_tol)
    # the difference stencil needs room on both sides of t
    if self_check and t - 2.0 * 1e-4 * t > ke.epsilon:
        _self_check_time_derivative(ke, t, uniq, kdp, kdm, abs_tol)

    ell = ke.cosmology.ell
    m = complex(ke.m)
    tp = complex(_cpow(t, 1j * m))
    tm = complex(_cpow(t, -1j * m))
    a_up = (1j * t ** (-0.5 * ell) * tp) * kdp[inverse]
    a_lo = (1j * t ** (-0.5 * ell) * tm) * kdm[inverse]
    b_up = (t ** (-1.5 * ell) * tm) * km[inverse]
    b_lo = (t ** (-1.5 * ell) * tp) * kp[inverse]

    hat = np.fft.fftn(psi1.data, axes=grid.spatial_axes)
    k1, k2, k3 = ks
    pm = k1 - 1j * k2
    pp = k1 + 1j * k2
    out = np.empty_like(hat)
    out[0] = a_up * hat[0] + b_up * (k3 * hat[2] + pm * hat[3])
    out[1] = a_up * hat[1] + b_up * (pp * hat[2] - k3 * hat[3])
    out[2] = a_lo * hat[2] + b_lo * (k3 * hat[0] + pm * hat[1])
    out[3] = a_lo * hat[3] + b_lo * (pp * hat[0] - k3 * hat[1])
    data = np.fft.ifftn(out, axes=grid.spatial_axes)
    return SpinorField(grid, data, t)


def _self_check_time_derivative(ke, t, uniq, kdp, kdm, abs_tol,
                                rel_tol: float = 1e-6, samples: int = 5):
    """Audit the analytic d/dt multipliers with a central difference."""
    idx = np.unique(np.linspace(0, len(uniq) - 1, samples).astype(int))
    sub = uniq[idx]
    dt = 1e-4 * t
    stencil = []
    for shift in (-2, -1, 1, 2):
        kp_s, _, km_s, _ = free_mode_multipliers(ke, t + shift * dt, sub, abs_tol)
        stencil.append((shift, kp_s, km_s))
    num_p = sum(c * kp_s for (s, kp_s, _), c in zip(stencil, (1/12, -2/3, 2/3, -1/12))) / dt
    num_m = sum(c * km_s for (s, _, km_s), c in zip(stencil, (1/12, -2/3, 2/3, -1/12))) / dt
    scale = max(float(np.max(np.abs(kdp[idx]))), float(np.max(np.abs(kdm[idx]))), 1e-30)
    err = max(
        float(np.max(np.abs(num_p - kdp[idx]))),
        float(np.max(np.abs(num_m - kdm[idx]))),
    )
    if err > rel_tol * scale:
        raise KernelConsistencyError(
            f"analytic time derivative disagrees with central difference: "
            f"relative error {err / scale:.3e}"
        )
