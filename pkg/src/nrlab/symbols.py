"""Asymptotically-Minkowski metric family and Klein-Gordon principal symbols.

The metric family, parameterized by the light speed c, is

    g(c) = -c^2 dt^2 + dx^2 + alpha dt^2 + sum_j (w_j/c) dt dx_j
           + c^-2 sum_jk h_jk dx_j dx_k,

with coefficients that are order ``-1`` classical symbols in spacetime.  The
conjugated operators carry frequency-quadratic principal symbols

    p = -g^{-1}(zeta, zeta) +/- 2 tau,       zeta = (tau, xi),

whose natural-scale rescaling h^2 p = -G(zeta_nat, zeta_nat) +/- 2 tau_nat
(with G the natural-units inverse metric) extends smoothly to h = 0, where
it reduces to the free hyperboloid form (tau_nat +/- 1)^2 - |xi_nat|^2 - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ChartUnavailable, DegenerateMetric, ExtrapolationUnstable
from .geometry import ChartCoords, ChartTag, PhasePoint

__all__ = [
    "ClassicalSymbolProfile",
    "OperatorCoefficient",
    "MetricParams",
    "SignBranch",
    "Side",
    "CharClass",
    "RadialPoint",
    "metric_matrix",
    "inverse_metric",
    "c_min_preflight",
    "aleph",
    "natural_quadform",
    "natural_symbol_value",
    "eval_p",
    "rescaled_symbol",
    "char_membership",
    "radial_point",
]


class SignBranch(Enum):
    """The +/- in the conjugated operators; PLUS conjugates by exp(-ic^2 t)."""

    PLUS = +1
    MINUS = -1

    @property
    def sign(self) -> int:
        return self.value


class Side(Enum):
    """Past/future hemisphere of spacetime infinity."""

    PAST = -1
    FUTURE = +1

    @property
    def sign(self) -> int:
        return self.value


class CharClass(Enum):
    SIGMA = "sigma"
    SIGMA_BAD = "sigma_bad"
    OFF = "off"


@dataclass(frozen=True)
class ClassicalSymbolProfile:
    """Classical symbol f(z) = A (1+|z|^2)^(r/2) g(z/<z>) on spacetime.

    g is a finite trigonometric polynomial in the compactified direction
    y = z/<z>, so f is smooth up to spacetime infinity and the decay order
    is exactly r.  ``waves`` holds (kappa, cos_coeff, sin_coeff) triples.
    """

    amplitude: float = 0.0
    order: int = -1
    constant: float = 1.0
    waves: tuple = ()

    def __post_init__(self):
        if self.order > -1:
            raise ValueError("classical profiles here must decay: order <= -1")

    @classmethod
    def zero(cls) -> "ClassicalSymbolProfile":
        return cls(amplitude=0.0)

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0.0

    def coefficient_norm(self) -> float:
        """Bound on |g| from the declared coefficients."""
        return abs(self.constant) + sum(
            abs(c) + abs(s) for _, c, s in self.waves
        )

    def _angular(self, y: np.ndarray):
        g = np.full(y.shape[:-1], self.constant, dtype=float)
        for kappa, c, s in self.waves:
            phase = y @ np.asarray(kappa, dtype=float)
            g = g + c * np.cos(phase) + s * np.sin(phase)
        return g

    def _angular_grad(self, y: np.ndarray):
        out = np.zeros_like(y)
        for kappa, c, s in self.waves:
            kappa = np.asarray(kappa, dtype=float)
            phase = y @ kappa
            out = out + (-c * np.sin(phase) + s * np.cos(phase))[..., None] * kappa
        return out

    def __call__(self, z) -> np.ndarray | float:
        """Evaluate at spacetime points z of shape (..., 1+d)."""
        if self.amplitude == 0.0:
            z = np.asarray(z, dtype=float)
            return np.zeros(z.shape[:-1]) if z.ndim > 1 else 0.0
        z = np.asarray(z, dtype=float)
        n2 = np.sum(z * z, axis=-1)
        bracket = np.sqrt(1.0 + n2)
        y = z / bracket[..., None]
        val = self.amplitude * bracket**self.order * self._angular(y)
        return val if val.ndim else float(val)

    def grad(self, z) -> np.ndarray:
        """Analytic spacetime gradient, shape (..., 1+d)."""
        z = np.asarray(z, dtype=float)
        if self.amplitude == 0.0:
            return np.zeros_like(z)
        n2 = np.sum(z * z, axis=-1)
        bracket = np.sqrt(1.0 + n2)
        y = z / bracket[..., None]
        g = self._angular(y)
        gy = self._angular_grad(y)
        # d y_j / d z_i = (delta_ij - y_i y_j) / <z>
        proj = gy - np.sum(gy * y, axis=-1)[..., None] * y
        radial = self.order * bracket ** (self.order - 2.0)
        return self.amplitude * (
            radial[..., None] * z * g[..., None]
            + (bracket ** (self.order - 1.0))[..., None] * proj
        )

    # -- compactified-base (ball) forms: Y = z/<z>, rho_bf = sqrt(1-|Y|^2) --

    def eval_ball(self, Y) -> float:
        """Value at the compactified base point Y (smooth up to |Y| = 1)."""
        Y = np.asarray(Y, dtype=float)
        if self.amplitude == 0.0:
            return np.zeros(Y.shape[:-1]) if Y.ndim > 1 else 0.0
        rho2 = np.clip(1.0 - np.sum(Y * Y, axis=-1), 0.0, None)
        val = self.amplitude * rho2 ** (-self.order / 2.0) * self._angular(Y)
        return val if np.ndim(val) else float(val)

    def comp_grad_ball(self, Y) -> np.ndarray:
        """Compensated gradient rho_bf^{-1} d f / d z_i expressed on the ball.

        Equals amplitude * rho_bf^{|r|} [ r Y_i g(Y) + (tangential grad g)_i ],
        which is smooth and vanishes at the boundary sphere like rho_bf^{|r|}.
        """
        Y = np.asarray(Y, dtype=float)
        if self.amplitude == 0.0:
            return np.zeros_like(Y)
        rho2 = np.clip(1.0 - np.sum(Y * Y, axis=-1), 0.0, None)
        g = self._angular(Y)
        gy = self._angular_grad(Y)
        proj = gy - np.sum(gy * Y, axis=-1)[..., None] * Y
        return self.amplitude * rho2[..., None] ** (-self.order / 2.0) * (
            self.order * Y * g[..., None] + proj
        )


@dataclass(frozen=True)
class OperatorCoefficient:
    """Complex lower-order coefficient: real part order -1, imaginary order -2.

    With ``imag_c_decay`` the imaginary part carries an extra 1/c factor and
    vanishes in the c -> infinity limit (required for the drift coefficients).
    """

    real: ClassicalSymbolProfile = field(default_factory=ClassicalSymbolProfile.zero)
    imag: ClassicalSymbolProfile = field(default_factory=ClassicalSymbolProfile.zero)
    imag_c_decay: bool = False

    def __post_init__(self):
        if not self.imag.is_zero and self.imag.order > -2:
            raise ValueError("imaginary parts must decay at least like <z>^-2")

    @classmethod
    def zero(cls) -> "OperatorCoefficient":
        return cls()

    @property
    def is_zero(self) -> bool:
        return self.real.is_zero and self.imag.is_zero

    def __call__(self, z, c: float = math.inf):
        re = self.real(z)
        im = self.imag(z)
        if self.imag_c_decay:
            scale = 0.0 if math.isinf(c) else 1.0 / c
            return re + 1j * scale * im
        return re + 1j * im


def _zero_profiles(n):
    return tuple(ClassicalSymbolProfile.zero() for _ in range(n))


@dataclass(frozen=True)
class MetricParams:
    """Finitely parameterized metric family plus lower-order operator terms."""

    d: int
    alpha: ClassicalSymbolProfile = field(default_factory=ClassicalSymbolProfile.zero)
    w: tuple = ()
    hjk: tuple = ()
    beta: OperatorCoefficient = field(default_factory=OperatorCoefficient.zero)
    B: tuple = ()
    W: OperatorCoefficient = field(default_factory=OperatorCoefficient.zero)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("d must be 1, 2, or 3")
        if not self.w:
            object.__setattr__(self, "w", _zero_profiles(self.d))
        if not self.hjk:
            object.__setattr__(
                self, "hjk", tuple(_zero_profiles(self.d) for _ in range(self.d))
            )
        if not self.B:
            object.__setattr__(
                self, "B", tuple(OperatorCoefficient.zero() for _ in range(self.d))
            )
        if len(self.w) != self.d or len(self.B) != self.d or len(self.hjk) != self.d:
            raise ValueError("coefficient tuples must have length d")
        for j in range(self.d):
            for k in range(j):
                if self.hjk[j][k] != self.hjk[k][j]:
                    raise ValueError("hjk must be symmetric")
        for Bj in self.B:
            if not Bj.imag.is_zero and not Bj.imag_c_decay:
                raise ValueError("Im B must vanish in the c -> infinity limit")

    @classmethod
    def free(cls, d: int = 1) -> "MetricParams":
        return cls(d=d)

    @property
    def is_flat(self) -> bool:
        """True when the second-order (metric) part is exactly Minkowski."""
        return (
            self.alpha.is_zero
            and all(p.is_zero for p in self.w)
            and all(p.is_zero for row in self.hjk for p in row)
        )

    def perturbation_amplitude(self) -> float:
        amps = [abs(self.alpha.amplitude) * self.alpha.coefficient_norm()]
        amps += [abs(p.amplitude) * p.coefficient_norm() for p in self.w]
        amps += [abs(p.amplitude) * p.coefficient_norm() for row in self.hjk for p in row]
        return max(amps)


def metric_matrix(M: MetricParams, z, c: float) -> np.ndarray:
    """The (1+d) x (1+d) metric matrix at spacetime point z for light speed c."""
    z = np.asarray(z, dtype=float)
    d = M.d
    g = np.zeros((d + 1, d + 1))
    g[0, 0] = -c * c + M.alpha(z)
    for j in range(d):
        wj = M.w[j](z) / c
        g[0, j + 1] = wj
        g[j + 1, 0] = wj
    for j in range(d):
        for k in range(d):
            g[j + 1, k + 1] = (1.0 if j == k else 0.0) + M.hjk[j][k](z) / c**2
    return g


def metric_matrix_grad(M: MetricParams, z, c: float) -> np.ndarray:
    """Spacetime gradient of the metric matrix: shape (1+d, 1+d, 1+d)."""
    z = np.asarray(z, dtype=float)
    d = M.d
    out = np.zeros((d + 1, d + 1, d + 1))
    out[0, 0] = M.alpha.grad(z)
    for j in range(d):
        gw = M.w[j].grad(z) / c
        out[0, j + 1] = gw
        out[j + 1, 0] = gw
    for j in range(d):
        for k in range(d):
            out[j + 1, k + 1] = M.hjk[j][k].grad(z) / c**2
    return out


def inverse_metric(M: MetricParams, z, c: float) -> np.ndarray:
    """Numerically exact inverse metric matrix.

    Raises DegenerateMetric when |det g| falls below 1e-12 of the Minkowski
    reference value c^2.
    """
    g = metric_matrix(M, z, c)
    det = np.linalg.det(g)
    if abs(det) < 1e-12 * c * c:
        raise DegenerateMetric(f"|det g| = {abs(det):.3e} below floor at z={z}")
    return np.linalg.inv(g)


def c_min_preflight(M: MetricParams, sample_radius: float = 50.0, n: int = 200,
                    seed: int = 0) -> float:
    """Smallest dyadic c at which the metric is nondegenerate on a sample.

    Reports the first c in 2, 4, 8, ... for which inverse_metric succeeds on
    a fixed random spacetime sample.  Non-trapping is not certified.
    """
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-sample_radius, sample_radius, size=(n, M.d + 1))
    c = 2.0
    while c <= 2.0**20:
        try:
            for z in pts:
                inverse_metric(M, z, c)
            return c
        except DegenerateMetric:
            c *= 2.0
    raise DegenerateMetric("metric degenerate on sample for all tested c")


def aleph(M: MetricParams, z, c_ladder=(1.0e3, 2.0e3, 4.0e3), rtol: float = 1.0e-6) -> float:
    """Asymptotic-mass coefficient: the c^-4 dt^2 coefficient of the metric
    correction to the d'Alembertian, lim c^4 (g^00 + c^-2).

    Computed by Richardson extrapolation in c^-2 over the given ladder, with
    a consistency check between the two successive extrapolants.
    """
    if M.is_flat:
        return 0.0
    vals = []
    for c in c_ladder:
        ginv = inverse_metric(M, z, c)
        vals.append(c**4 * (ginv[0, 0] + c**-2))
    # f(c) = aleph + a c^-2 + O(c^-4) on a dyadic ladder
    r12 = (4.0 * vals[1] - vals[0]) / 3.0
    r23 = (4.0 * vals[2] - vals[1]) / 3.0
    if abs(r12 - r23) > rtol * (1.0 + abs(r23)):
        raise ExtrapolationUnstable(
            f"aleph extrapolants disagree: {r12!r} vs {r23!r}"
        )
    return float(r23)


def aleph_field(M: MetricParams, z_points, c_ladder=(1.0e3, 2.0e3, 4.0e3),
                rtol: float = 1.0e-6) -> np.ndarray:
    """Vectorized asymptotic-mass coefficient over points of shape (..., 1+d).

    Same extrapolation as :func:`aleph`, with batched matrix inverses.
    """
    z_points = np.asarray(z_points, dtype=float)
    if M.is_flat:
        return np.zeros(z_points.shape[:-1])
    d = M.d
    vals = []
    for c in c_ladder:
        g = np.zeros(z_points.shape[:-1] + (d + 1, d + 1))
        g[..., 0, 0] = -c * c + M.alpha(z_points)
        for j in range(d):
            wj = M.w[j](z_points) / c
            g[..., 0, j + 1] = wj
            g[..., j + 1, 0] = wj
        for j in range(d):
            for k in range(d):
                g[..., j + 1, k + 1] = (1.0 if j == k else 0.0) + M.hjk[j][k](z_points) / c**2
        ginv = np.linalg.inv(g)
        vals.append(c**4 * (ginv[..., 0, 0] + c**-2))
    r12 = (4.0 * vals[1] - vals[0]) / 3.0
    r23 = (4.0 * vals[2] - vals[1]) / 3.0
    dev = np.max(np.abs(r12 - r23) / (1.0 + np.abs(r23)))
    if dev > rtol:
        raise ExtrapolationUnstable(f"aleph field extrapolants deviate by {dev:.2e}")
    return r23


def natural_quadform(M: MetricParams, z, h: float) -> np.ndarray:
    """Inverse metric in natural frequency units: G = S g^-1 S, S = diag(c, 1..).

    G contracts with zeta_nat = (tau_nat, xi_nat); at h = 0 it equals
    diag(-1, I) exactly for every admissible metric (all corrections carry
    positive powers of 1/c), which realizes p = p0 on the h = 0 faces.
    """
    d = M.d
    if h == 0.0 or M.is_flat:
        G = np.eye(d + 1)
        G[0, 0] = -1.0
        return G
    c = 1.0 / h
    ginv = inverse_metric(M, z, c)
    S = np.ones(d + 1)
    S[0] = c
    return ginv * np.outer(S, S)


def natural_symbol_value(M: MetricParams, z, zeta_nat, h: float, b: SignBranch) -> float:
    """Natural-scale symbol h^2 p = -G(zeta_nat, zeta_nat) +/- 2 tau_nat."""
    zeta_nat = np.atleast_1d(np.asarray(zeta_nat, dtype=float))
    G = natural_quadform(M, z, h)
    return float(-(zeta_nat @ G @ zeta_nat) + 2.0 * b.sign * zeta_nat[0])


def eval_p(p, M: MetricParams, b: SignBranch) -> float:
    """Principal symbol of the conjugated operator.

    For an interior PhasePoint (h > 0): the unrescaled
    p = -g^{-1}(zeta, zeta) +/- 2 tau.  For ChartCoords (or h = 0 points):
    the chart-rescaled symbol; see rescaled_symbol.
    """
    if isinstance(p, ChartCoords):
        return rescaled_symbol(p, M, b)
    if p.h > 0.0:
        return natural_symbol_value(M, p.z, p.zeta_nat, p.h, b) / p.h**2
    # h = 0: only the rescaled symbol extends; use the natural-face chart form
    return natural_symbol_value(M, p.z, p.zeta_nat, 0.0, b)


def rescaled_symbol(cc, M: MetricParams, b: SignBranch) -> float:
    """Chart-rescaled symbol rho_df^2 rho_nf^2 p in the chart's local bdfs.

    Accepts a PhasePoint (treated in the natural-face chart, where the
    rescaled symbol is -G(zeta_nat, zeta_nat) +/- 2 tau_nat) or ChartCoords
    in any of the four phase-space charts.
    """
    if isinstance(cc, PhasePoint):
        return natural_symbol_value(M, cc.z, cc.zeta_nat, cc.h, b)
    tag = cc.chart.tag
    co = cc.coords
    d = (co.size - 3) // 2
    z = co[: 1 + d]
    if tag is ChartTag.NAT_INTERIOR:
        tau_nat, xi_nat, h = co[1 + d], co[2 + d : 2 + 2 * d], co[-1]
        return natural_symbol_value(M, z, np.concatenate(([tau_nat], xi_nat)), h, b)
    if tag is ChartTag.DF_PROJECTIVE:
        rho_df, xi_hat, h = co[1 + d], co[2 + d : 2 + 2 * d], co[-1]
        sign = cc.chart.sign
        zeta_hat = np.concatenate(([float(sign)], xi_hat))
        G = natural_quadform(M, z, h)
        return float(-(zeta_hat @ G @ zeta_hat) + 2.0 * b.sign * sign * rho_df)
    if tag is ChartTag.PF_STANDARD:
        tau, xi, h = co[1 + d], co[2 + d : 2 + 2 * d], co[-1]
        if h > 0.0:
            ginv = inverse_metric(M, z, 1.0 / h)
            zeta = np.concatenate(([tau], xi))
            return float(-(zeta @ ginv @ zeta) + 2.0 * b.sign * tau)
        return float(-(xi @ xi) + 2.0 * b.sign * tau)
    if tag is ChartTag.PF_NAT_PARABOLIC:
        rho_nf, xi_hat, rho_pf = co[1 + d], co[2 + d : 2 + 2 * d], co[-1]
        sign = cc.chart.sign
        h = rho_nf * rho_pf
        vec = np.concatenate(([sign * rho_pf], xi_hat))
        G = natural_quadform(M, z, h)
        return float(-(vec @ G @ vec) + 2.0 * b.sign * sign)
    raise ChartUnavailable(f"rescaled symbol not defined in chart {tag}")


def _membership_side(tau_nat_signed: float) -> CharClass:
    """Sheet classification from the signed natural time frequency +/- tau_nat."""
    if tau_nat_signed > -1.0:
        return CharClass.SIGMA
    if tau_nat_signed < -1.0:
        return CharClass.SIGMA_BAD
    return CharClass.OFF


def char_membership(p, M: MetricParams, b: SignBranch, tol: float = 1.0e-9) -> CharClass:
    """Classify a point against the two sheets of the characteristic set.

    SIGMA: |rescaled symbol| <= tol and the point lies in the closure of
    {+/- tau_nat > -1}; SIGMA_BAD likewise with {+/- tau_nat < -1}; else OFF.
    """
    if isinstance(p, PhasePoint):
        zn = p.zeta_nat
        value = natural_symbol_value(M, p.z, zn, p.h, b) / (1.0 + float(zn @ zn))
        if abs(value) > tol:
            return CharClass.OFF
        return _membership_side(b.sign * p.tau_nat)
    value = rescaled_symbol(p, M, b)
    if abs(value) > tol:
        return CharClass.OFF
    tag = p.chart.tag
    co = p.coords
    d = (co.size - 3) // 2
    if tag is ChartTag.NAT_INTERIOR:
        return _membership_side(b.sign * co[1 + d])
    if tag is ChartTag.DF_PROJECTIVE:
        # tau_nat = sign / rho_df -> +/- infinity toward the df face
        rho_df = co[1 + d]
        if rho_df > 0.0:
            return _membership_side(b.sign * p.chart.sign / rho_df)
        return CharClass.SIGMA if b.sign * p.chart.sign > 0 else CharClass.SIGMA_BAD
    if tag is ChartTag.PF_STANDARD:
        tau, h = co[1 + d], co[-1]
        return _membership_side(b.sign * h**2 * tau)
    if tag is ChartTag.PF_NAT_PARABOLIC:
        rho_pf = co[-1]
        return _membership_side(b.sign * p.chart.sign * rho_pf**2)
    raise ChartUnavailable(f"char_membership not defined in chart {tag}")


@dataclass(frozen=True)
class RadialPoint:
    """A point of the radial set: frequencies on the characteristic sheet plus
    the base direction (a unit vector in compactified spacetime)."""

    tau_nat: float
    xi_nat: np.ndarray
    h: float
    side: Side
    branch: SignBranch
    direction: np.ndarray  # unit (1+d)-vector omega

    def __post_init__(self):
        object.__setattr__(self, "xi_nat", np.atleast_1d(np.asarray(self.xi_nat, float)))
        object.__setattr__(self, "direction", np.asarray(self.direction, float))

    @property
    def d(self) -> int:
        return self.xi_nat.size

    @property
    def zeta_nat(self) -> np.ndarray:
        return np.concatenate(([self.tau_nat], self.xi_nat))


def radial_point(xi_nat, h: float, side: Side, b: SignBranch) -> RadialPoint:
    """The radial-set point over a given spatial natural frequency.

    tau_nat = +/- (sqrt(1+|xi_nat|^2) - 1) puts the frequencies on the good
    sheet; the base direction is side * (h sqrt(1+|xi_nat|^2), -(+/-) xi_nat),
    normalized.  At h = 0, xi_nat = 0 the direction degenerates to the
    future/past pole (the blown-up parabolic-face limit).
    """
    xi_nat = np.atleast_1d(np.asarray(xi_nat, dtype=float))
    root = math.sqrt(1.0 + float(xi_nat @ xi_nat))
    tau_nat = b.sign * (root - 1.0)
    vec = np.concatenate(([h * root], -b.sign * xi_nat))
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        direction = np.zeros(xi_nat.size + 1)
        direction[0] = side.sign
    else:
        direction = side.sign * vec / norm
    return RadialPoint(tau_nat, xi_nat, h, side, b, direction)
