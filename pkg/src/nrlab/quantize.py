"""Desk-scale left quantization on periodic grids.

Functions live on a periodic box (side L, N points per axis); symbols
a(z, zeta) live on the product of that box with a frequency box whose
spacing matches the DFT frequencies 2 pi k / L of the base grid, so the
discrete left quantization

    (Op(a) u)(z) = sum_k a(z, zeta_k) u_hat(k) e^{i zeta_k . z}

is exact on band-limited inputs.  Symbol derivatives are spectral; symbols
with exact monomial structure (polynomials in z and zeta) carry it along
and differentiate exactly, which is what makes the polynomial star-product
identities hold at round-off level.  Test objects are kept within a quarter
of the box so periodization error is part of the measured residuals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ExtrapolationUnstable, GridMismatch, SpectrumOverflow

__all__ = [
    "BoxGrid",
    "GridField",
    "GridSymbol",
    "frequency_grid",
    "op_apply",
    "star_truncated",
    "poisson",
    "conjugate_translate",
    "normal_symbol",
    "save_binary",
    "load_binary",
]

SMOOTHNESS_TOP_THIRD = 1.0e-8   # spectral-decay preflight threshold
MODE_ENERGY_FLOOR = 1.0e-30     # relative energy below which a mode is ignored


@dataclass(frozen=True)
class BoxGrid:
    """Uniform periodic tensor grid: per-axis box sides and point counts."""

    sides: tuple
    ns: tuple

    def __post_init__(self):
        object.__setattr__(self, "sides", tuple(float(L) for L in self.sides))
        object.__setattr__(self, "ns", tuple(int(n) for n in self.ns))
        for n in self.ns:
            if n & (n - 1):
                raise ValueError("grid sizes must be powers of two")

    @classmethod
    def regular(cls, side: float, n: int, ndim: int = 1) -> "BoxGrid":
        return cls((side,) * ndim, (n,) * ndim)

    @property
    def ndim(self) -> int:
        return len(self.ns)

    @property
    def shape(self) -> tuple:
        return self.ns

    @property
    def spacings(self) -> tuple:
        return tuple(L / n for L, n in zip(self.sides, self.ns))

    @property
    def dvol(self) -> float:
        return float(np.prod(self.spacings))

    def axis_points(self, i: int) -> np.ndarray:
        L, n = self.sides[i], self.ns[i]
        return -L / 2.0 + np.arange(n) * (L / n)

    def axis_freqs(self, i: int) -> np.ndarray:
        """DFT frequencies (unshifted fft order)."""
        L, n = self.sides[i], self.ns[i]
        return 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)

    def mesh(self) -> list:
        return np.meshgrid(*[self.axis_points(i) for i in range(self.ndim)],
                           indexing="ij")

    def freq_mesh(self) -> list:
        return np.meshgrid(*[self.axis_freqs(i) for i in range(self.ndim)],
                           indexing="ij")


def frequency_grid(zgrid: BoxGrid, scales=None, n=None) -> BoxGrid:
    """Frequency box matching the DFT frequencies of a base grid.

    The spacing on axis i is (2 pi / L_i) * scale_i, so the scaled DFT
    frequencies of the base grid land exactly on grid points.  ``scales``
    defaults to 1 on each axis; pass (h^2, h, ..., h) for the natural-scale
    quantization.
    """
    if scales is None:
        scales = (1.0,) * zgrid.ndim
    ns = zgrid.ns if n is None else ((n,) * zgrid.ndim if np.isscalar(n) else tuple(n))
    sides = tuple(
        2.0 * np.pi / L * s * m for L, s, m in zip(zgrid.sides, scales, ns)
    )
    return BoxGrid(sides, ns)


@dataclass
class GridField:
    """Complex samples on a periodic base grid."""

    grid: BoxGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise GridMismatch("field values do not match the grid shape")

    @classmethod
    def from_function(cls, grid: BoxGrid, f) -> "GridField":
        return cls(grid, f(*grid.mesh()))

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy())

    def coefficients(self) -> np.ndarray:
        """DFT coefficients c_k with u(z_j) = sum_k c_k e^{i zeta_k . z_j}."""
        return np.fft.fftn(self.values) / self.values.size

    def norm(self) -> float:
        """L^2 norm with the grid quadrature weight."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dvol))

    def band_limited(self, frac: float = 1.0 / 3.0, tol: float = 1.0e-10) -> bool:
        """True when the upper ``frac`` of the spectrum holds < tol energy."""
        c = np.abs(self.coefficients()) ** 2
        total = float(c.sum())
        if total == 0.0:
            return True
        mask = np.zeros(c.shape, dtype=bool)
        for i in range(c.ndim):
            f = np.abs(np.fft.fftfreq(c.shape[i]))
            sel = f > 0.5 * (1.0 - frac)
            sh = [1] * c.ndim
            sh[i] = -1
            mask |= sel.reshape(sh)
        return float(c[mask].sum()) < tol * total


def _axis_smooth_enough(values: np.ndarray, axis: int) -> bool:
    spec = np.abs(np.fft.fft(values, axis=axis)) ** 2
    total = spec.sum()
    if total == 0.0:
        return True
    n = values.shape[axis]
    f = np.abs(np.fft.fftfreq(n))
    sel = f > 1.0 / 3.0
    idx = [slice(None)] * values.ndim
    idx[axis] = sel
    return spec[tuple(idx)].sum() < SMOOTHNESS_TOP_THIRD * total


def _spectral_derivative(values: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    n = values.shape[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=spacing)
    shape = [1] * values.ndim
    shape[axis] = n
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(values, axis=axis), axis=axis)


@dataclass
class GridSymbol:
    """Sampled symbol a(z, zeta) with declared orders (m, s, l, q).

    ``poly``, when present, is an exact monomial representation
    {(alpha_z, alpha_zeta): coeff} that evaluation and differentiation use
    instead of the samples.  Sampled (non-polynomial) symbols must pass a
    spectral-decay preflight before spectral differentiation.
    """

    zgrid: BoxGrid
    zetagrid: BoxGrid
    values: np.ndarray
    orders: tuple = (0.0, 0.0, 0.0, 0.0)
    poly: dict | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.zgrid.shape + self.zetagrid.shape:
            raise GridMismatch("symbol values do not match zgrid x zetagrid")

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_function(cls, zgrid, zetagrid, f, orders=(0.0, 0.0, 0.0, 0.0)):
        zm = zgrid.mesh()
        fm = [m_[(Ellipsis,) + (None,) * zetagrid.ndim] for m_ in zm]
        qm = zetagrid.mesh()
        qm = [m_[(None,) * zgrid.ndim + (Ellipsis,)] for m_ in qm]
        vals = np.broadcast_to(np.asarray(f(*fm, *qm), dtype=complex),
                               zgrid.shape + zetagrid.shape).copy()
        return cls(zgrid, zetagrid, vals, orders)

    @classmethod
    def from_poly(cls, zgrid, zetagrid, poly: dict, orders=(0.0, 0.0, 0.0, 0.0)):
        sym = cls(zgrid, zetagrid,
                  np.zeros(zgrid.shape + zetagrid.shape, dtype=complex),
                  orders, dict(poly))
        sym.values = sym._poly_sample()
        return sym

    @classmethod
    def constant(cls, zgrid, zetagrid, value=1.0):
        D = zgrid.ndim
        return cls.from_poly(zgrid, zetagrid,
                             {((0,) * D, (0,) * D): complex(value)})

    @classmethod
    def coordinate(cls, zgrid, zetagrid, kind: str, axis: int):
        """The monomial symbol z_axis or zeta_axis."""
        D = zgrid.ndim
        az = [0] * D
        aq = [0] * D
        (az if kind == "z" else aq)[axis] = 1
        return cls.from_poly(zgrid, zetagrid, {(tuple(az), tuple(aq)): 1.0 + 0.0j})

    # -- polynomial machinery ----------------------------------------------

    def _poly_sample(self) -> np.ndarray:
        zm = self.zgrid.mesh()
        qm = self.zetagrid.mesh()
        Dz, Dq = self.zgrid.ndim, self.zetagrid.ndim
        out = np.zeros(self.zgrid.shape + self.zetagrid.shape, dtype=complex)
        for (az, aq), cf in self.poly.items():
            term = np.ones(self.zgrid.shape)
            for i, e in enumerate(az):
                if e:
                    term = term * zm[i] ** e
            termq = np.ones(self.zetagrid.shape)
            for i, e in enumerate(aq):
                if e:
                    termq = termq * qm[i] ** e
            out += (cf * term[(Ellipsis,) + (None,) * Dq]
                    * termq[(None,) * Dz + (Ellipsis,)])
        return out

    def poly_eval(self, z, zeta) -> complex:
        z = np.atleast_1d(z)
        zeta = np.atleast_1d(zeta)
        out = 0.0 + 0.0j
        for (az, aq), cf in self.poly.items():
            term = cf
            for i, e in enumerate(az):
                if e:
                    term = term * z[i] ** e
            for i, e in enumerate(aq):
                if e:
                    term = term * zeta[i] ** e
            out += term
        return out

    # -- derivatives ---------------------------------------------------------

    def _poly_derivative(self, kind: str, axis: int) -> dict:
        out = {}
        for (az, aq), cf in self.poly.items():
            exps = list(az if kind == "z" else aq)
            if exps[axis] == 0:
                continue
            e = exps[axis]
            exps[axis] = e - 1
            key = (tuple(exps), aq) if kind == "z" else (az, tuple(exps))
            out[key] = out.get(key, 0.0) + cf * e
        return out

    def d_z(self, axis: int) -> "GridSymbol":
        """Partial derivative in the base variable z_axis."""
        if self.poly is not None:
            return GridSymbol.from_poly(self.zgrid, self.zetagrid,
                                        self._poly_derivative("z", axis), self.orders)
        if not _axis_smooth_enough(self.values, axis):
            raise SpectrumOverflow(
                f"symbol not smooth enough along z-axis {axis} for a spectral derivative"
            )
        vals = _spectral_derivative(self.values, axis, self.zgrid.spacings[axis])
        return GridSymbol(self.zgrid, self.zetagrid, vals, self.orders)

    def d_zeta(self, axis: int) -> "GridSymbol":
        """Partial derivative in the frequency variable zeta_axis."""
        if self.poly is not None:
            return GridSymbol.from_poly(self.zgrid, self.zetagrid,
                                        self._poly_derivative("zeta", axis), self.orders)
        ax = self.zgrid.ndim + axis
        if not _axis_smooth_enough(self.values, ax):
            raise SpectrumOverflow(
                f"symbol not smooth enough along zeta-axis {axis} for a spectral derivative"
            )
        vals = _spectral_derivative(self.values, ax, self.zetagrid.spacings[axis])
        return GridSymbol(self.zgrid, self.zetagrid, vals, self.orders)

    # -- algebra -------------------------------------------------------------

    def _check_mate(self, other: "GridSymbol"):
        if self.zgrid != other.zgrid or self.zetagrid != other.zetagrid:
            raise GridMismatch("symbols live on different grids")

    def __mul__(self, other):
        if isinstance(other, GridSymbol):
            self._check_mate(other)
            poly = None
            if self.poly is not None and other.poly is not None:
                poly = {}
                for (az1, aq1), c1 in self.poly.items():
                    for (az2, aq2), c2 in other.poly.items():
                        key = (tuple(np.add(az1, az2)), tuple(np.add(aq1, aq2)))
                        poly[key] = poly.get(key, 0.0) + c1 * c2
            out = GridSymbol(self.zgrid, self.zetagrid, self.values * other.values,
                             tuple(np.add(self.orders, other.orders)), poly)
            return out
        return GridSymbol(self.zgrid, self.zetagrid, self.values * other,
                          self.orders,
                          None if self.poly is None else
                          {k: v * other for k, v in self.poly.items()})

    __rmul__ = __mul__

    def __add__(self, other: "GridSymbol") -> "GridSymbol":
        self._check_mate(other)
        poly = None
        if self.poly is not None and other.poly is not None:
            poly = dict(self.poly)
            for k, v in other.poly.items():
                poly[k] = poly.get(k, 0.0) + v
        return GridSymbol(self.zgrid, self.zetagrid, self.values + other.values,
                          tuple(np.maximum(self.orders, other.orders)), poly)

    def __sub__(self, other: "GridSymbol") -> "GridSymbol":
        return self + (other * (-1.0))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def fitted_zeta_order(self) -> float:
        """Fitted growth exponent of sup_z |a| against <zeta> (outer shells)."""
        qm = self.zetagrid.mesh()
        r = np.sqrt(sum(m * m for m in qm) + 1.0)
        zax = tuple(range(self.zgrid.ndim))
        sup = np.max(np.abs(self.values), axis=zax)
        rf, sf = r.ravel(), sup.ravel()
        keep = (rf > np.median(rf)) & (sf > 0)
        if keep.sum() < 8:
            return 0.0
        return float(np.polyfit(np.log(rf[keep]), np.log(sf[keep]), 1)[0])


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------


def _mode_index_on(zetagrid: BoxGrid, eta: np.ndarray):
    """Index of a frequency vector on the symbol's zeta-grid, or None."""
    idx = []
    for i, v in enumerate(eta):
        pts0 = -zetagrid.sides[i] / 2.0
        d = zetagrid.spacings[i]
        j = round((v - pts0) / d)
        if not (0 <= j < zetagrid.ns[i]):
            return None
        if abs(pts0 + j * d - v) > 1.0e-9 * max(1.0, abs(v)):
            return None
        idx.append(j)
    return tuple(idx)


def op_apply(a: GridSymbol, u: GridField, h: float | None = None,
             natural: bool = False) -> GridField:
    """Discrete left quantization applied to a field.

    With ``natural=True`` the symbol is understood to be sampled in the
    natural frequencies and is evaluated at (h^2 tau, h xi_1, ...) for the
    DFT frequencies (tau, xi) of the base grid.  Raises SpectrumOverflow if
    an energetic mode of u falls outside the symbol's frequency box.
    """
    if u.grid != a.zgrid:
        raise GridMismatch("field and symbol base grids differ")
    D = u.grid.ndim
    scales = np.ones(D)
    if natural:
        if h is None or h <= 0:
            raise ValueError("natural quantization requires h > 0")
        scales[0] = h * h
        scales[1:] = h
    coeffs = u.coefficients()
    total = float(np.sum(np.abs(coeffs) ** 2))
    out = np.zeros(u.grid.shape, dtype=complex)
    if total == 0.0:
        return GridField(u.grid, out)
    mesh = u.grid.mesh()
    freqs = [u.grid.axis_freqs(i) for i in range(D)]
    for k in np.ndindex(*u.grid.shape):
        c = coeffs[k]
        if abs(c) ** 2 <= MODE_ENERGY_FLOOR * total:
            continue
        zeta = np.array([freqs[i][k[i]] for i in range(D)])
        eta = scales * zeta
        if a.poly is None:
            sym_slice = _mode_index_on(a.zetagrid, eta)
            if sym_slice is None:
                raise SpectrumOverflow(
                    f"mode {zeta} (scaled {eta}) outside the symbol frequency box"
                )
        # DFT coefficients refer to the basis exp(2 pi i j k / N); re-anchor the
        # plane wave at the grid origin z = -L/2
        phase = np.zeros(u.grid.shape)
        for i in range(D):
            phase = phase + zeta[i] * mesh[i]
        origin = sum(zeta[i] * u.grid.sides[i] / 2.0 for i in range(D))
        wave = np.exp(1j * (phase + origin))
        if a.poly is not None:
            amp = np.zeros(u.grid.shape, dtype=complex)
            for (az, aq), cf in a.poly.items():
                term = np.full(u.grid.shape, cf, dtype=complex)
                for i, e in enumerate(az):
                    if e:
                        term = term * mesh[i] ** e
                for i, e in enumerate(aq):
                    if e:
                        term = term * eta[i] ** e
                amp += term
        else:
            amp = a.values[(Ellipsis, *sym_slice)]
        out += amp * (c * wave)
    return GridField(u.grid, out)


def _multi_indices(D, N):
    for total in range(N + 1):
        for alpha in _compositions(total, D):
            yield alpha


def _compositions(total, D):
    if D == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, D - 1):
            yield (first,) + rest


def star_truncated(a: GridSymbol, b: GridSymbol, N: int) -> GridSymbol:
    """Truncated composition symbol sum_{|alpha|<=N} (1/alpha!) d_zeta^alpha a  D_z^alpha b.

    N = 0 is the pointwise product; each additional term gains one order at
    the frequency, base, and natural faces.  Exact (as a polynomial) when
    both factors carry monomial structure.
    """
    a._check_mate(b)
    D = a.zgrid.ndim
    out = None
    for alpha in _multi_indices(D, N):
        da = a
        db = b
        for i, e in enumerate(alpha):
            for _ in range(e):
                da = da.d_zeta(i)
                db = db.d_z(i)
        fact = 1.0
        for e in alpha:
            fact *= math.factorial(e)
        # D_z = -i d_z per derivative
        term = da * db * ((-1j) ** sum(alpha) / fact)
        out = term if out is None else out + term
    return out


def poisson(a: GridSymbol, b: GridSymbol) -> GridSymbol:
    """Poisson bracket {a,b} = sum_i (d_zeta_i a d_z_i b - d_z_i a d_zeta_i b).

    Axis 0 of the base is the time variable, so the i = 0 term is the
    (d_tau a)(d_t b) - (d_t a)(d_tau b) part of the fixed sign convention.
    """
    a._check_mate(b)
    out = None
    for i in range(a.zgrid.ndim):
        term = a.d_zeta(i) * b.d_z(i) - a.d_z(i) * b.d_zeta(i)
        out = term if out is None else out + term
    return out


def conjugate_translate(a: GridSymbol, shift: float, h: float) -> GridSymbol:
    """Translate the symbol by ``shift`` in the natural time frequency.

    Equals conjugation of the quantized operator by exp(i shift t / h^2).
    On-grid shifts are exact circular shifts; off-grid shifts use spectral
    interpolation.  Raises SpectrumOverflow when the translation would wrap
    symbol mass around the frequency box.
    """
    axis = a.zgrid.ndim  # the tau_nat axis of the values array
    d = a.zetagrid.spacings[0]
    n = a.zetagrid.ns[0]
    steps = shift / d
    # wrap check: mass in the strip that would cross the boundary
    nsteps = int(math.ceil(abs(steps)))
    if nsteps >= n:
        raise SpectrumOverflow("shift exceeds the frequency box")
    if nsteps > 0:
        sl = [slice(None)] * a.values.ndim
        sl[axis] = slice(-nsteps, None) if shift > 0 else slice(0, nsteps)
        strip = float(np.sum(np.abs(a.values[tuple(sl)]) ** 2))
        total = float(np.sum(np.abs(a.values) ** 2))
        if total > 0 and strip > 1.0e-10 * total:
            raise SpectrumOverflow("translation pushes symbol support off-grid")
    if abs(steps - round(steps)) < 1.0e-9:
        vals = np.roll(a.values, int(round(steps)), axis=axis)
        return GridSymbol(a.zgrid, a.zetagrid, vals, a.orders)
    spec = np.fft.fft(a.values, axis=axis)
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=d)
    sh = [1] * a.values.ndim
    sh[axis] = n
    vals = np.fft.ifft(spec * np.exp(-1j * k.reshape(sh) * shift), axis=axis)
    return GridSymbol(a.zgrid, a.zetagrid, vals, a.orders)


def normal_symbol(family, taper: int = 2, rtol: float = 1.0e-6) -> GridSymbol:
    """Richardson h -> 0 limit of an h-indexed symbol family (the pf-restriction).

    ``family`` maps h to GridSymbol at h, h/2, h/4 on one fixed grid.  The
    two top extrapolation orders are compared; disagreement beyond ``rtol``
    (relative to the result's sup) raises ExtrapolationUnstable.
    """
    items = sorted(family.items(), key=lambda kv: -kv[0])
    if len(items) != 3:
        raise ValueError("family must hold exactly three h values")
    hs = [kv[0] for kv in items]
    if not (np.isclose(hs[0] / hs[1], 2.0) and np.isclose(hs[1] / hs[2], 2.0)):
        raise ValueError("family h values must be h0, h0/2, h0/4")
    a0, a1, a2 = (kv[1] for kv in items)
    a0._check_mate(a1)
    a0._check_mate(a2)
    r1 = 2.0 * a2.values - a1.values                     # kills the h term
    r2 = (a0.values - 6.0 * a1.values + 8.0 * a2.values) / 3.0   # kills h, h^2
    scale = 1.0 + float(np.max(np.abs(r2)))
    dev = float(np.max(np.abs(r1 - r2))) / scale
    if dev > rtol:
        raise ExtrapolationUnstable(
            f"order-1/order-2 extrapolants deviate by {dev:.3e} (rtol {rtol:.1e})"
        )
    vals = r2 if taper >= 2 else r1
    return GridSymbol(a0.zgrid, a0.zetagrid, vals, a0.orders)


# ---------------------------------------------------------------------------
# binary import/export: row-major little-endian 8-byte floats + JSON sidecar
# ---------------------------------------------------------------------------


def save_binary(obj, path_prefix) -> tuple[Path, Path]:
    """Write a field or symbol as <prefix>.bin + <prefix>.json.

    The .bin holds the row-major complex samples as interleaved little-endian
    float64 (re, im) pairs; the sidecar records shape, box sides, and orders.
    """
    prefix = Path(path_prefix)
    if isinstance(obj, GridField):
        meta = {
            "kind": "field",
            "shape": list(obj.values.shape),
            "sides": list(obj.grid.sides),
            "byte_order": "little",
            "dtype": "float64 interleaved re/im",
        }
        data = obj.values
    elif isinstance(obj, GridSymbol):
        meta = {
            "kind": "symbol",
            "shape": list(obj.values.shape),
            "z_sides": list(obj.zgrid.sides),
            "zeta_sides": list(obj.zetagrid.sides),
            "z_ns": list(obj.zgrid.ns),
            "zeta_ns": list(obj.zetagrid.ns),
            "orders": list(obj.orders),
            "byte_order": "little",
            "dtype": "float64 interleaved re/im",
        }
        data = obj.values
    else:
        raise TypeError("save_binary expects a GridField or GridSymbol")
    flat = np.empty(data.size * 2, dtype="<f8")
    flat[0::2] = data.real.ravel()
    flat[1::2] = data.imag.ravel()
    bin_path = prefix.with_suffix(".bin")
    json_path = prefix.with_suffix(".json")
    flat.tofile(bin_path)
    json_path.write_text(json.dumps(meta, indent=1))
    return bin_path, json_path


def load_binary(path_prefix):
    prefix = Path(path_prefix)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    flat = np.fromfile(prefix.with_suffix(".bin"), dtype="<f8")
    vals = (flat[0::2] + 1j * flat[1::2]).reshape(meta["shape"])
    if meta["kind"] == "field":
        grid = BoxGrid(tuple(meta["sides"]), tuple(meta["shape"]))
        return GridField(grid, vals)
    zgrid = BoxGrid(tuple(meta["z_sides"]), tuple(meta["z_ns"]))
    zetagrid = BoxGrid(tuple(meta["zeta_sides"]), tuple(meta["zeta_ns"]))
    return GridSymbol(zgrid, zetagrid, vals, tuple(meta["orders"]))
