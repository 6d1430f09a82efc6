"""Exact reflection operator of a 1-D lamellar grating under conical incidence.

Geometry and conventions
------------------------
The grating occupies z < 0 apart from ridges of permittivity eps and width
p*d that rise to z = a within each period d; vacuum fills the grooves and the
half-space above.  Operators are expressed in the (polarization x diffraction
order) basis of dimension 2(2N+1), ordered [s_{-N}..s_{N}, p_{-N}..p_{N}],
and are referenced at the corrugation-top plane z = a, i.e. the plane of
closest approach between two facing gratings.

Per order n the transverse wavevector is (kx + 2 pi n / d, ky) and the
longitudinal wavenumber obeys the branch -pi/2 < arg(kz) <= pi/2.  The unit
polarization vectors are s = (-ky, kx_n, 0)/kt and, for the p mode, the
in-plane electric field is +(kz/k0) k_t_hat for a downward wave and its
negative for an upward wave; with this sign choice a flat surface reflects
with the Fresnel coefficients r_s = (kz1 - kz2)/(kz1 + kz2) and
r_p = (eps kz1 - kz2)/(eps kz1 + kz2).

The grating-layer modes come from the dense eigenproblem for the transverse
electric field (Ex, Ey), with the inverse-rule Fourier factorization applied
to Ex (the component discontinuous across the ridge walls) so that TM
convergence in N is uniform.  Layer-to-substrate matching uses scattering
matrices composed with the Redheffer star product, never transfer matrices.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .constants import C_LIGHT

log = logging.getLogger(__name__)


class EigenDecompositionError(RuntimeError):
    """Modal eigenproblem failed; carries the evaluation point."""

    def __init__(self, omega, kx, ky, n_orders):
        super().__init__(
            f"grating eigenproblem failed at omega={omega:.6e}, kx={kx:.6e}, "
            f"ky={ky:.6e}, N={n_orders}"
        )
        self.point = (omega, kx, ky, n_orders)


@dataclass(frozen=True)
class GratingGeometry:
    """Lamellar grating: period, groove depth, filling factor, lateral shift.

    The ridge width is p*d; ``delta`` is stored reduced modulo the period.
    """

    period: float
    depth: float
    fill: float
    delta: float = 0.0

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.depth < 0:
            raise ValueError("groove depth must be non-negative")
        if not 0.0 < self.fill < 1.0:
            raise ValueError("filling factor must lie strictly in (0, 1)")
        object.__setattr__(self, "delta", self.delta % self.period)

    @property
    def ridge_width(self) -> float:
        return self.fill * self.period


def longitudinal_wavenumber(eps, k0, kx, ky):
    """kz = sqrt(eps*k0^2 - kx^2 - ky^2) on the branch -pi/2 < arg kz <= pi/2."""
    kz = np.sqrt(np.asarray(eps * k0**2 - kx**2 - ky**2, dtype=complex))
    flip = (kz.real < 0) | ((kz.real == 0) & (kz.imag < 0))
    return np.where(flip, -kz, kz)


@dataclass(frozen=True)
class ModeBasis:
    """Diffraction-order lattice (omega, kx, ky, N) over a period d."""

    omega: float
    kx: float
    ky: float
    n_orders: int
    period: float
    kx_orders: np.ndarray = field(init=False, repr=False)
    kz: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.omega <= 0 or self.period <= 0 or self.n_orders < 0:
            raise ValueError("invalid basis parameters")
        if abs(self.kx) > math.pi / self.period * (1 + 1e-12):
            raise ValueError("kx must lie in the first Brillouin zone")
        n = np.arange(-self.n_orders, self.n_orders + 1)
        kxo = self.kx + 2.0 * math.pi * n / self.period
        object.__setattr__(self, "kx_orders", kxo)
        object.__setattr__(
            self, "kz",
            longitudinal_wavenumber(1.0, self.omega / C_LIGHT, kxo, self.ky),
        )

    @property
    def k0(self) -> float:
        return self.omega / C_LIGHT

    @property
    def order_count(self) -> int:
        return 2 * self.n_orders + 1

    @property
    def dim(self) -> int:
        return 2 * self.order_count

    @property
    def propagating(self) -> np.ndarray:
        """Per-order mask: True where the vacuum mode is propagative."""
        return (self.k0**2 - self.kx_orders**2 - self.ky**2) > 0


@dataclass(frozen=True)
class ReflectionOperator:
    """Dense complex reflection matrix in the 2(2N+1) mode basis."""

    matrix: np.ndarray
    basis: ModeBasis

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise ValueError("operator dimension does not match its basis")
        object.__setattr__(self, "matrix", m)


# ---------------------------------------------------------------------------
# homogeneous-region modes


def _homogeneous_modes(eps, k0, kxo, ky):
    """s/p plane-wave mode matrices of a uniform medium over the order lattice.

    Returns (e_down, e_up, h_down, h_up, kz), each field matrix of shape
    (..., 2M, 2M) with rows (Ex harmonics, Ey harmonics) and columns
    [s orders, p orders].  Broadcasts over leading axes of kxo/ky.
    """
    kxo = np.asarray(kxo, dtype=float)
    ky = np.asarray(ky, dtype=float)[..., None]
    m = kxo.shape[-1]
    kt = np.sqrt(kxo**2 + ky**2)
    safe = kt > 0
    # unit vectors; at kt = 0 take s along y and the transverse axis along x
    tx = np.where(safe, kxo / np.where(safe, kt, 1.0), 1.0)
    ty = np.where(safe, ky / np.where(safe, kt, 1.0), 0.0)
    sx, sy = -ty, tx
    kz = longitudinal_wavenumber(eps, k0, kxo, ky)
    sq = np.sqrt(complex(eps))

    shape = np.broadcast_shapes(kxo.shape, (ky * np.ones_like(kxo)).shape)
    batch = shape[:-1]
    e_dn = np.zeros(batch + (2 * m, 2 * m), dtype=complex)
    e_up = np.zeros_like(e_dn)
    h_dn = np.zeros_like(e_dn)
    h_up = np.zeros_like(e_dn)
    idx = np.arange(m)

    # s columns
    e_dn[..., idx, idx] = sx
    e_dn[..., m + idx, idx] = sy
    e_up[..., idx, idx] = sx
    e_up[..., m + idx, idx] = sy
    h_up[..., idx, idx] = -(kz / k0) * tx
    h_up[..., m + idx, idx] = -(kz / k0) * ty
    h_dn[..., idx, idx] = (kz / k0) * tx
    h_dn[..., m + idx, idx] = (kz / k0) * ty
    # p columns
    e_dn[..., idx, m + idx] = (kz / (sq * k0)) * tx
    e_dn[..., m + idx, m + idx] = (kz / (sq * k0)) * ty
    e_up[..., idx, m + idx] = -(kz / (sq * k0)) * tx
    e_up[..., m + idx, m + idx] = -(kz / (sq * k0)) * ty
    h_dn[..., idx, m + idx] = -sq * sx
    h_dn[..., m + idx, m + idx] = -sq * sy
    h_up[..., idx, m + idx] = -sq * sx
    h_up[..., m + idx, m + idx] = -sq * sy
    return e_dn, e_up, h_dn, h_up, kz


def planar_reflection(eps: complex, basis: ModeBasis) -> ReflectionOperator:
    """Specular reflection operator of a flat surface of permittivity eps.

    Diagonal Fresnel coefficients per order; no cross-order or
    cross-polarization coupling.
    """
    kz1 = basis.kz
    kz2 = longitudinal_wavenumber(eps, basis.k0, basis.kx_orders, basis.ky)
    r_s = (kz1 - kz2) / (kz1 + kz2)
    r_p = (eps * kz1 - kz2) / (eps * kz1 + kz2)
    return ReflectionOperator(np.diag(np.concatenate([r_s, r_p])), basis)


# ---------------------------------------------------------------------------
# grating layer


def _binary_toeplitz(value_ridge, value_groove, fill, n_orders):
    """Toeplitz Fourier matrix of a binary profile with the ridge centered
    at x = 0 (lateral shifts are applied as phase conjugations downstream)."""
    m = np.arange(0, 2 * n_orders + 1)
    coeff = np.empty(2 * n_orders + 1, dtype=complex)
    coeff[0] = value_ridge * fill + value_groove * (1.0 - fill)
    mm = m[1:]
    coeff[1:] = (value_ridge - value_groove) * np.sin(np.pi * mm * fill) / (np.pi * mm)
    return toeplitz(coeff)


def _layer_operator(eps, fill, n_orders):
    """Per-frequency Fourier matrices of the structured layer."""
    eps_y = _binary_toeplitz(eps, 1.0, fill, n_orders)
    eps_x = np.linalg.inv(_binary_toeplitz(1.0 / eps, 1.0, fill, n_orders))
    eps_z_inv = np.linalg.inv(eps_y)
    return eps_x, eps_y, eps_z_inv


def _field_coupling(eps_x, eps_y, eps_z_inv, k0, kxo, ky):
    """The first-order coupling matrix G with dh/dz = iG e (h from e)."""
    m = kxo.shape[-1]
    ky = np.asarray(ky, dtype=float)[..., None]
    g11 = np.zeros(np.broadcast_shapes(kxo.shape, (ky * np.ones_like(kxo)).shape)
                   [:-1] + (m, m), dtype=complex)
    g11[..., np.arange(m), np.arange(m)] = -(kxo * ky) / k0
    g12 = -k0 * eps_y + 0j * g11
    g12[..., np.arange(m), np.arange(m)] += kxo**2 / k0
    g21 = k0 * eps_x - (ky[..., None] ** 2 / k0) * np.eye(m)
    g21 = g21 + 0j * g11
    g22 = np.zeros_like(g11)
    g22[..., np.arange(m), np.arange(m)] = (kxo * ky) / k0
    return np.block([[g11, g12], [g21, g22]])


def _layer_modes(eps_x, eps_y, eps_z_inv, k0, kxo, ky, point_info):
    """Eigenmodes of the grating layer at stacked (kx, ky) points.

    kxo: (..., M) order wavevectors, ky: (...,) scalar per point.  Returns
    (e_modes, h_modes, beta) with shapes (..., 2M, 2M) and (..., 2M).

    The second-order operator for (Ex, Ey) is exactly block lower-triangular
    in this factorization: the Ex-Ey coupling block vanishes identically
    because it carries the factor (I - eps_z_inv eps_y) = 0.  The 2M
    eigenproblem therefore splits into two M-sized ones,

        M11 = (k0^2 - Kx eps_z_inv Kx) eps_x - ky^2,
        M22 = k0^2 eps_y - Kx^2 - ky^2,

    with the Ey part of an M11 mode recovered from a shifted linear solve.
    Points where an M11 eigenvalue lands on the M22 spectrum (so the solve
    is singular) fall back to the dense 2M eigenproblem.
    """
    m = kxo.shape[-1]
    ky_arr = np.asarray(ky, dtype=float)
    ky_c = ky_arr[..., None]
    a_z = eps_z_inv
    kx_c = kxo[..., :, None]
    kx_r = kxo[..., None, :]
    eye = np.eye(m)

    ky2 = (ky_c**2)[..., None]
    m11 = (k0**2 * eye - kx_c * a_z * kx_r) @ eps_x - ky2 * eye
    m22 = k0**2 * eps_y - ky2 * eye + 0j
    m22[..., np.arange(m), np.arange(m)] -= kxo**2
    m21 = -ky_c[..., None] * (a_z @ (kx_c * eps_x))
    m21[..., np.arange(m), np.arange(m)] += kxo * ky_c

    try:
        bsq_a, u_a = np.linalg.eig(m11)
        bsq_b, v_b = np.linalg.eig(m22)
    except np.linalg.LinAlgError as exc:
        raise EigenDecompositionError(*point_info) from exc

    # Ey part of the M11 family: (bsq_a - M22) v = M21 u, solved in the
    # eigenbasis of M22 where the shifted operator is diagonal
    denom = bsq_a[..., None, :] - bsq_b[..., :, None]
    sep = np.abs(denom).min(axis=-2)
    scale = np.abs(bsq_a).max(axis=-1, keepdims=True)
    degenerate = np.any(sep < 1e-10 * np.maximum(scale, 1e-300), axis=-1)
    if np.any(degenerate):
        log.info("dense-eigenproblem fallback at %d points, omega=%.6e (N=%d)",
                 int(np.count_nonzero(degenerate)), point_info[0], point_info[3])
        denom = np.where(np.abs(denom) < 1e-10 * np.maximum(scale[..., None],
                                                            1e-300),
                         1.0, denom)
    try:
        w_coef = np.linalg.solve(v_b, m21 @ u_a)
    except np.linalg.LinAlgError as exc:
        raise EigenDecompositionError(*point_info) from exc
    v_a = v_b @ (w_coef / denom)

    zero = np.zeros_like(u_a)
    e_modes = np.concatenate([
        np.concatenate([u_a, zero], axis=-1),
        np.concatenate([v_a, v_b], axis=-1),
    ], axis=-2)
    beta_sq = np.concatenate([bsq_a, bsq_b], axis=-1)

    if np.any(degenerate):
        g_deg = _field_coupling(eps_x, eps_y, eps_z_inv, k0,
                                kxo[degenerate], ky_arr[degenerate])
        f_deg = _field_admittance(eps_z_inv, k0, kxo[degenerate],
                                  ky_arr[degenerate])
        try:
            bsq_d, e_d = np.linalg.eig(f_deg @ g_deg)
        except np.linalg.LinAlgError as exc:
            raise EigenDecompositionError(*point_info) from exc
        beta_sq[degenerate] = bsq_d
        e_modes[degenerate] = e_d

    beta = np.sqrt(beta_sq.astype(complex))
    flip = (beta.imag < 0) | ((beta.imag == 0) & (beta.real < 0))
    beta = np.where(flip, -beta, beta)

    g = _field_coupling(eps_x, eps_y, eps_z_inv, k0, kxo, ky_arr)
    h_modes = (g @ e_modes) / beta[..., None, :]
    return e_modes, h_modes, beta


def _field_admittance(eps_z_inv, k0, kxo, ky):
    """The first-order coupling matrix F with de/dz = iF h (e from h)."""
    m = kxo.shape[-1]
    ky = np.asarray(ky, dtype=float)[..., None]
    a_z = eps_z_inv
    kx_c = kxo[..., :, None]
    kx_r = kxo[..., None, :]
    eye = np.eye(m)
    f11 = (kx_c * a_z) * (ky[..., None] / k0)
    f12 = k0 * eye - (kx_c * a_z * kx_r) / k0
    f21 = (ky[..., None] ** 2 / k0) * a_z - k0 * eye
    f22 = -(ky[..., None] / k0) * (a_z * kx_r)
    return np.block([[f11, f12], [f21, f22]])


# ---------------------------------------------------------------------------
# scattering-matrix assembly


def _interface_smatrix(ea_dn, ea_up, ha_dn, ha_up, eb_dn, eb_up, hb_dn, hb_up):
    """S-matrix of the interface between region a (above) and b (below).

    Maps (down_a, up_b) -> (up_a, down_b); returns (r, t_back, t, r_back)
    blocks and the 1-norm condition estimate of the matching matrix.
    """
    dim = ea_dn.shape[-1]
    m_out = np.concatenate([
        np.concatenate([ea_up, -eb_dn], axis=-1),
        np.concatenate([ha_up, -hb_dn], axis=-1),
    ], axis=-2)
    m_in = np.concatenate([
        np.concatenate([-ea_dn, eb_up], axis=-1),
        np.concatenate([-ha_dn, hb_up], axis=-1),
    ], axis=-2)
    inv_out = np.linalg.inv(m_out)
    cond = (np.abs(m_out).sum(axis=-2).max(axis=-1)
            * np.abs(inv_out).sum(axis=-2).max(axis=-1))
    s = inv_out @ m_in
    return (s[..., :dim, :dim], s[..., :dim, dim:],
            s[..., dim:, :dim], s[..., dim:, dim:]), cond


def _star(sa, sb):
    """Redheffer star product; sa sits above sb."""
    ra, tba, ta, rra = sa
    rb, tbb, tb, rrb = sb
    dim = ra.shape[-1]
    eye = np.eye(dim)
    inv1 = np.linalg.inv(eye - rra @ rb)
    inv2 = np.linalg.inv(eye - rb @ rra)
    r = ra + tba @ rb @ inv1 @ ta
    t = tb @ inv1 @ ta
    t_back = tba @ inv2 @ tbb
    r_back = rrb + tb @ rra @ inv2 @ tbb
    return (r, t_back, t, r_back)


def _homogeneous_blocks(eps, k0, kxo, ky):
    """Per-order 2x2 mode blocks of a uniform medium.

    Each block maps the two mode amplitudes (s, p) of one order to the
    tangential components (x, y) of that order.  Returns (e_dn, e_up, h_dn,
    h_up, kz) with block arrays of shape (..., M, 2, 2).
    """
    kxo = np.asarray(kxo, dtype=float)
    ky = np.asarray(ky, dtype=float)[..., None]
    kt = np.sqrt(kxo**2 + ky**2)
    safe = kt > 0
    tx = np.where(safe, kxo / np.where(safe, kt, 1.0), 1.0)
    ty = np.where(safe, ky / np.where(safe, kt, 1.0), 0.0)
    sx, sy = -ty, tx
    kz = longitudinal_wavenumber(eps, k0, kxo, ky)
    sq = np.sqrt(complex(eps))

    def _blocks(col_s_x, col_s_y, col_p_x, col_p_y):
        out = np.empty(np.broadcast(col_s_x, col_p_x).shape + (2, 2),
                       dtype=complex)
        out[..., 0, 0] = col_s_x
        out[..., 1, 0] = col_s_y
        out[..., 0, 1] = col_p_x
        out[..., 1, 1] = col_p_y
        return out

    e_dn = _blocks(sx + 0j, sy + 0j, (kz / (sq * k0)) * tx, (kz / (sq * k0)) * ty)
    e_up = _blocks(sx + 0j, sy + 0j, -(kz / (sq * k0)) * tx, -(kz / (sq * k0)) * ty)
    h_dn = _blocks((kz / k0) * tx, (kz / k0) * ty, -sq * sx + 0j, -sq * sy + 0j)
    h_up = _blocks(-(kz / k0) * tx, -(kz / k0) * ty, -sq * sx + 0j, -sq * sy + 0j)
    return e_dn, e_up, h_dn, h_up, kz


def _block_inv(b):
    det = b[..., 0, 0] * b[..., 1, 1] - b[..., 0, 1] * b[..., 1, 0]
    out = np.empty_like(b)
    out[..., 0, 0] = b[..., 1, 1]
    out[..., 1, 1] = b[..., 0, 0]
    out[..., 0, 1] = -b[..., 0, 1]
    out[..., 1, 0] = -b[..., 1, 0]
    return out / det[..., None, None]


def _block_apply(blk, dense):
    """Multiply a block-diagonal operator (..., M, 2, 2) acting on stacked
    (x harmonics, y harmonics) rows into a dense (..., 2M, K) matrix."""
    m = blk.shape[-3]
    dx = dense[..., :m, :]
    dy = dense[..., m:, :]
    ox = blk[..., :, 0, 0, None] * dx + blk[..., :, 0, 1, None] * dy
    oy = blk[..., :, 1, 0, None] * dx + blk[..., :, 1, 1, None] * dy
    return np.concatenate([ox, oy], axis=-2)


def _block_dense(blk):
    """Expand per-order 2x2 blocks into the dense (..., 2M, 2M) matrix with
    column ordering [s orders, p orders] and row ordering [x, y] harmonics."""
    m = blk.shape[-3]
    out = np.zeros(blk.shape[:-3] + (2 * m, 2 * m), dtype=complex)
    idx = np.arange(m)
    out[..., idx, idx] = blk[..., :, 0, 0]
    out[..., m + idx, idx] = blk[..., :, 1, 0]
    out[..., idx, m + idx] = blk[..., :, 0, 1]
    out[..., m + idx, m + idx] = blk[..., :, 1, 1]
    return out


def _cond1(mat, inv):
    return (np.abs(mat).sum(axis=-2).max(axis=-1)
            * np.abs(inv).sum(axis=-2).max(axis=-1))


def _scattering_stack(geometry: GratingGeometry, eps: complex, omega: float,
                      kx, ky, n_orders: int, want_transmission: bool = True):
    """Reflection/transmission of the vacuum | grating layer | substrate stack
    at stacked (kx, ky) points for one frequency.

    Returns (r, t, cond): r and t of shape (..., 2M, 2M) in the s/p bases of
    vacuum and substrate, referenced at the corrugation top, plus a 1-norm
    condition estimate of the modal matching per point.  The homogeneous-side
    mode matrices are inverted analytically per order, so the matching
    reduces to dense solves of the modal dimension only.
    """
    kx = np.atleast_1d(np.asarray(kx, dtype=float))
    ky = np.atleast_1d(np.asarray(ky, dtype=float))
    k0 = omega / C_LIGHT
    n = np.arange(-n_orders, n_orders + 1)
    kxo = kx[..., None] + 2.0 * math.pi * n / geometry.period
    m = kxo.shape[-1]
    eye = np.eye(2 * m)

    ve_dn, ve_up, vh_dn, vh_up, _ = _homogeneous_blocks(1.0, k0, kxo, ky)
    se_dn, _, sh_dn, _, _ = _homogeneous_blocks(eps, k0, kxo, ky)

    eps_x, eps_y, eps_z_inv = _layer_operator(eps, geometry.fill, n_orders)
    w, v, beta = _layer_modes(eps_x, eps_y, eps_z_inv, k0, kxo, ky,
                              (omega, float(kx.flat[0]), float(ky.flat[0]),
                               n_orders))

    # top interface (vacuum | layer), blocks eliminated through the vacuum side
    ie_up = _block_inv(ve_up)
    y_blk = vh_up @ ie_up
    z = _block_apply(y_blk, w)
    a_top = z + v
    inv_top = np.linalg.inv(a_top)
    rhs_d = _block_dense(y_blk @ ve_dn - vh_dn)
    t_a = inv_top @ rhs_d                    # down_vac -> down_layer
    rr_a = inv_top @ (v - z)                 # up_layer -> down_layer
    r_a = _block_apply(ie_up, w @ t_a - _block_dense(ve_dn))
    tb_a = _block_apply(ie_up, w @ (rr_a + eye))   # up_layer -> up_vac

    # bottom interface (layer | substrate)
    x_blk = sh_dn @ _block_inv(se_dn)
    xw = _block_apply(x_blk, w)
    a_bot = v - xw
    inv_bot = np.linalg.inv(a_bot)
    r_b = inv_bot @ (v + xw)                 # down_layer -> up_layer

    phase = np.exp(1j * beta * geometry.depth)
    prbp = phase[..., :, None] * r_b * phase[..., None, :]
    den = eye - rr_a @ prbp
    inv_den = np.linalg.inv(den)
    d_top = inv_den @ t_a
    r = r_a + tb_a @ prbp @ d_top

    cond = np.maximum(_cond1(a_top, inv_top), _cond1(a_bot, inv_bot))
    cond = np.maximum(cond, _cond1(den, inv_den))

    t = None
    if want_transmission:
        t_b = _block_apply(_block_inv(se_dn), w @ (eye + r_b))
        t = t_b @ (phase[..., :, None] * d_top)
    return r, t, cond


def _scattering_stack_reference(geometry: GratingGeometry, eps: complex,
                                omega: float, kx, ky, n_orders: int):
    """Slow-path stack assembly through generic interface S-matrices and the
    Redheffer star product.  Kept as an independent cross-check of the
    block-eliminated fast path; returns (r, t, cond) like _scattering_stack."""
    kx = np.atleast_1d(np.asarray(kx, dtype=float))
    ky = np.atleast_1d(np.asarray(ky, dtype=float))
    k0 = omega / C_LIGHT
    n = np.arange(-n_orders, n_orders + 1)
    kxo = kx[..., None] + 2.0 * math.pi * n / geometry.period

    vac = _homogeneous_modes(1.0, k0, kxo, ky)
    sub = _homogeneous_modes(eps, k0, kxo, ky)

    eps_x, eps_y, eps_z_inv = _layer_operator(eps, geometry.fill, n_orders)
    e_lay, h_lay, beta = _layer_modes(eps_x, eps_y, eps_z_inv, k0, kxo, ky,
                                      (omega, float(kx.flat[0]),
                                       float(ky.flat[0]), n_orders))

    s_top, cond_top = _interface_smatrix(vac[0], vac[1], vac[2], vac[3],
                                         e_lay, e_lay, -h_lay, h_lay)
    s_bot, cond_bot = _interface_smatrix(e_lay, e_lay, -h_lay, h_lay,
                                         sub[0], sub[1], sub[2], sub[3])
    phase = np.exp(1j * beta * geometry.depth)
    zero = np.zeros_like(s_top[0])
    diag = np.zeros_like(s_top[0])
    idx = np.arange(phase.shape[-1])
    diag[..., idx, idx] = phase
    s_prop = (zero, diag, diag, zero)

    total = _star(_star(s_top, s_prop), s_bot)
    cond = np.maximum(cond_top, cond_bot)
    return total[0], total[2], cond


def grating_reflection(geometry: GratingGeometry, eps: complex,
                       basis: ModeBasis) -> ReflectionOperator:
    """Exact Fourier-modal reflection operator of the lamellar grating,
    including the geometry's lateral displacement."""
    r, _, _ = _scattering_stack(geometry, eps, basis.omega,
                                np.array([basis.kx]), np.array([basis.ky]),
                                basis.n_orders, want_transmission=False)
    op = ReflectionOperator(r[0], basis)
    if geometry.delta:
        op = apply_lateral_shift(op, geometry.delta)
    return op


def apply_lateral_shift(op: ReflectionOperator, delta: float) -> ReflectionOperator:
    """Phase conjugation realizing a lateral displacement by delta:
    R' = Phi R Phi^dagger with Phi_nn = exp(i 2 pi n delta / d) per order."""
    n = np.arange(-op.basis.n_orders, op.basis.n_orders + 1)
    phi = np.exp(1j * 2.0 * math.pi * n * delta / op.basis.period)
    phi = np.concatenate([phi, phi])
    return ReflectionOperator(phi[:, None] * op.matrix * phi.conj()[None, :],
                              op.basis)


def facing_operator(op: ReflectionOperator) -> ReflectionOperator:
    """Reflection operator of the mirror-image grating facing the first.

    A reflection through a z = const plane maps s modes onto themselves and
    flips the sign of p modes, so the operator of the upper grating is
    Q R Q with Q = diag(+1 on the s block, -1 on the p block).  Diagonal
    (specular) entries are unchanged, which the flat-limit tests pin down.
    """
    m = op.basis.order_count
    q = np.concatenate([np.ones(m), -np.ones(m)])
    return ReflectionOperator(q[:, None] * op.matrix * q[None, :], op.basis)


def mode_power_flux(eps: complex, basis: ModeBasis) -> np.ndarray:
    """Normal power flux carried by a unit-amplitude mode in a lossless
    medium, Re(kz)/k0 per (polarization, order) column."""
    kz = longitudinal_wavenumber(eps, basis.k0, basis.kx_orders, basis.ky)
    f = kz.real / basis.k0
    return np.concatenate([f, f])
