"""Coordinate charts and boundary-defining functions for the resolved phase space.

The phase space compactifies spacetime (t, x), the rescaled frequencies
(tau_nat, xi_nat) = (h^2 tau, h xi), and the inverse light speed h = 1/c.
Its boundary has four faces:

* ``df`` -- frequency infinity,
* ``bf`` -- spacetime infinity,
* ``nf`` -- the natural face at h = 0 away from the rescaled zero section,
* ``pf`` -- the parabolic face created by blowing up the zero section at
  h = 0 parabolically (one time order worth two space orders).

Everything here is an explicit formula: chart maps, their inverses, and one
fixed global choice of boundary-defining function (bdf) per face.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import ChartUnavailable, FitFailure, OnBoundary, OutOfChart

__all__ = [
    "PhasePoint",
    "BdfValues",
    "ChartTag",
    "ChartId",
    "ChartCoords",
    "chi_cutoff",
    "bdf_values",
    "to_chart",
    "from_chart",
    "parabolic_chart",
    "from_parabolic_chart",
    "ParabolicRay",
    "b_order_fit",
]

# validity margins fixed once for reproducibility
DF_CHART_MARGIN = 0.1     # DfProjective needs |tau_nat| >= margin * |zeta_nat|
PF_PARABOLIC_MIN_TAU = 1.0  # PfNatParabolic needs |tau| >= 1
# PfStandard covers the parabolic-face vicinity (bounded standard
# frequencies); beyond this bound its unrescaled symbol loses 6+ digits to
# cancellation and the other charts take over
PF_STANDARD_MAX_FREQ = 300.0


def _as_vector(x) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError("expected a flat coordinate vector")
    return v


@dataclass(frozen=True)
class PhasePoint:
    """Interior point: spacetime position, natural frequencies, and h = 1/c."""

    t: float
    x: np.ndarray
    tau_nat: float
    xi_nat: np.ndarray
    h: float

    def __post_init__(self):
        object.__setattr__(self, "x", _as_vector(self.x))
        object.__setattr__(self, "xi_nat", _as_vector(self.xi_nat))
        if self.x.shape != self.xi_nat.shape:
            raise ValueError("x and xi_nat must have the same dimension")
        if self.h < 0:
            raise ValueError("h must be nonnegative")

    @property
    def d(self) -> int:
        return self.x.size

    @property
    def z(self) -> np.ndarray:
        """Spacetime coordinates (t, x)."""
        return np.concatenate(([self.t], self.x))

    @property
    def zeta_nat(self) -> np.ndarray:
        return np.concatenate(([self.tau_nat], self.xi_nat))

    @property
    def tau(self) -> float:
        """Standard time frequency tau = tau_nat / h^2 (h > 0 only)."""
        if self.h <= 0:
            raise OnBoundary("standard frequencies undefined at h = 0")
        return self.tau_nat / self.h**2

    @property
    def xi(self) -> np.ndarray:
        """Standard space frequencies xi = xi_nat / h (h > 0 only)."""
        if self.h <= 0:
            raise OnBoundary("standard frequencies undefined at h = 0")
        return self.xi_nat / self.h


@dataclass(frozen=True)
class BdfValues:
    """Values of the four global boundary-defining functions at a point."""

    rho_df: float
    rho_bf: float
    rho_nf: float
    rho_pf: float

    def as_dict(self):
        return {
            "rho_df": self.rho_df,
            "rho_bf": self.rho_bf,
            "rho_nf": self.rho_nf,
            "rho_pf": self.rho_pf,
        }


class ChartTag(Enum):
    NAT_INTERIOR = "nat_interior"
    DF_PROJECTIVE = "df_projective"
    PF_STANDARD = "pf_standard"
    PF_NAT_PARABOLIC = "pf_nat_parabolic"
    PAR_FREQ_TAU = "par_freq_tau"
    PAR_FREQ_XI = "par_freq_xi"
    # chart adapted to the radial sets; coordinates (s, w, rho_bf) over the
    # natural frequencies.  Used by the flow module.
    RADIAL_NAT = "radial_nat"


@dataclass(frozen=True)
class ChartId:
    """Chart identifier: a tag plus, where needed, an axis index and a sign.

    ``k`` selects the dominant frequency axis for PAR_FREQ_XI (1-based, as in
    xi_1 .. xi_d) and the dominant spatial axis for RADIAL_NAT.  ``sign`` is
    the sign of the dominant quantity (tau, xi_k, or x_k).
    """

    tag: ChartTag
    k: int | None = None
    sign: int = +1

    def __post_init__(self):
        if self.tag in (ChartTag.PAR_FREQ_XI, ChartTag.RADIAL_NAT) and self.k is None:
            raise ValueError(f"{self.tag} requires an axis index k")
        if self.sign not in (-1, +1):
            raise ValueError("sign must be -1 or +1")


@dataclass(frozen=True)
class ChartCoords:
    """Chart-local coordinates together with the local bdf values."""

    chart: ChartId
    coords: np.ndarray
    bdf: BdfValues

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_vector(self.coords))


def _sigma(s):
    """exp(-1/s) for s > 0, else 0; the standard smooth transition kernel."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out if out.ndim else float(out)


def chi_cutoff(zeta_nat) -> float:
    """Smooth cutoff in the natural frequencies: 1 on |zeta| <= 1, 0 on >= 2."""
    r = float(np.linalg.norm(np.atleast_1d(zeta_nat)))
    up = _sigma(np.array(2.0 - r))
    down = _sigma(np.array(r - 1.0))
    if up == 0.0:
        return 0.0
    return float(up / (up + down))


def bdf_values(p: PhasePoint) -> BdfValues:
    """Global smooth boundary-defining functions at an interior point.

    rho_bf = (1+t^2+|x|^2)^(-1/2), rho_df = (1+tau_nat^2+|xi_nat|^2)^(-1/2),
    rho_nf = h + chi(zeta_nat) (1+tau^2+|xi|^4)^(-1/4) written in the
    h-stable equivalent form h (1 + chi * (h^4+tau_nat^2+|xi_nat|^4)^(-1/4)),
    and rho_pf = h / rho_nf.  rho_nf * rho_pf = h exactly.
    """
    zn = p.zeta_nat
    rho_bf = 1.0 / math.sqrt(1.0 + p.t**2 + float(p.x @ p.x))
    rho_df = 1.0 / math.sqrt(1.0 + float(zn @ zn))
    chi = chi_cutoff(zn)
    quart = p.h**4 + p.tau_nat**2 + float(np.sum(p.xi_nat**4))
    if quart > 0.0:
        a = quart**-0.25
    else:
        a = math.inf
    if p.h > 0.0:
        rho_nf = p.h * (1.0 + chi * a)
    else:
        rho_nf = 0.0
    if math.isinf(a):
        rho_pf = 0.0 if chi > 0.0 else 1.0
    else:
        rho_pf = 1.0 / (1.0 + chi * a)
    return BdfValues(rho_df=rho_df, rho_bf=rho_bf, rho_nf=rho_nf, rho_pf=rho_pf)


# ---------------------------------------------------------------------------
# chart-local bdf conventions
#
# Each chart fixes its own local bdf representatives (smooth positive
# multiples of the global ones on the chart's validity region):
#
#   NAT_INTERIOR     rho_df = 1 (chart covers bounded zeta_nat), rho_nf = h,
#                    rho_pf = 1
#   DF_PROJECTIVE    rho_df = 1/|tau_nat|,             rho_nf = h, rho_pf = 1
#   PF_STANDARD      rho_df = 1, rho_nf = 1,           rho_pf = h
#   PF_NAT_PARABOLIC rho_df = 1, rho_nf = |tau|^(-1/2), rho_pf = h |tau|^(1/2)
#
# with rho_bf = (1+t^2+|x|^2)^(-1/2) throughout.
# ---------------------------------------------------------------------------


def _rho_bf_of(t, x) -> float:
    return 1.0 / math.sqrt(1.0 + t**2 + float(np.dot(x, x)))


def to_chart(p: PhasePoint, c: ChartId) -> ChartCoords:
    """Express an interior point in chart-local coordinates.

    Raises OutOfChart when the point is outside the chart's validity region.
    """
    d = p.d
    rho_bf = _rho_bf_of(p.t, p.x)
    if c.tag is ChartTag.NAT_INTERIOR:
        coords = np.concatenate(([p.t], p.x, [p.tau_nat], p.xi_nat, [p.h]))
        bdf = BdfValues(rho_df=1.0, rho_bf=rho_bf, rho_nf=p.h, rho_pf=1.0)
        return ChartCoords(ChartId(ChartTag.NAT_INTERIOR), coords, bdf)

    if c.tag is ChartTag.DF_PROJECTIVE:
        zn_norm = float(np.linalg.norm(p.zeta_nat))
        if p.tau_nat == 0.0 or abs(p.tau_nat) < DF_CHART_MARGIN * zn_norm:
            raise OutOfChart("DfProjective requires |tau_nat| >= 0.1 |zeta_nat| > 0")
        sign = 1 if p.tau_nat > 0 else -1
        rho_df = 1.0 / abs(p.tau_nat)
        xi_hat = p.xi_nat / abs(p.tau_nat)
        coords = np.concatenate(([p.t], p.x, [rho_df], xi_hat, [p.h]))
        bdf = BdfValues(rho_df=rho_df, rho_bf=rho_bf, rho_nf=p.h, rho_pf=1.0)
        return ChartCoords(ChartId(ChartTag.DF_PROJECTIVE, sign=sign), coords, bdf)

    if c.tag is ChartTag.PF_STANDARD:
        if p.h <= 0:
            raise OutOfChart("PfStandard needs h > 0 to recover (tau, xi)")
        tau, xi = p.tau, p.xi
        if abs(tau) > PF_STANDARD_MAX_FREQ or np.max(np.abs(xi), initial=0.0) > PF_STANDARD_MAX_FREQ:
            raise OutOfChart("PfStandard covers bounded standard frequencies only")
        coords = np.concatenate(([p.t], p.x, [tau], xi, [p.h]))
        bdf = BdfValues(rho_df=1.0, rho_bf=rho_bf, rho_nf=1.0, rho_pf=p.h)
        return ChartCoords(ChartId(ChartTag.PF_STANDARD), coords, bdf)

    if c.tag is ChartTag.PF_NAT_PARABOLIC:
        if p.h <= 0:
            raise OutOfChart("PfNatParabolic needs h > 0 to recover tau")
        tau = p.tau
        if abs(tau) < PF_PARABOLIC_MIN_TAU:
            raise OutOfChart("PfNatParabolic requires |tau| >= 1")
        sign = 1 if tau > 0 else -1
        rho_nf = abs(tau) ** -0.5
        xi_hat = p.xi * rho_nf
        rho_pf = p.h / rho_nf
        coords = np.concatenate(([p.t], p.x, [rho_nf], xi_hat, [rho_pf]))
        bdf = BdfValues(rho_df=1.0, rho_bf=rho_bf, rho_nf=rho_nf, rho_pf=rho_pf)
        return ChartCoords(ChartId(ChartTag.PF_NAT_PARABOLIC, sign=sign), coords, bdf)

    if c.tag in (ChartTag.PAR_FREQ_TAU, ChartTag.PAR_FREQ_XI):
        if p.h <= 0:
            raise OutOfChart("frequency charts need standard frequencies (h > 0)")
        return parabolic_chart(p.tau, p.xi, prefer=c)

    raise ChartUnavailable(f"to_chart does not handle {c.tag}")


def from_chart(cc: ChartCoords) -> PhasePoint:
    """Invert a chart map back to an interior PhasePoint.

    Raises OnBoundary if a bdf coordinate vanishes (the point sits on a
    boundary face and has no interior preimage).
    """
    tag = cc.chart.tag
    co = cc.coords
    if tag is ChartTag.NAT_INTERIOR:
        d = (co.size - 3) // 2
        t, x = co[0], co[1 : 1 + d]
        tau_nat, xi_nat, h = co[1 + d], co[2 + d : 2 + 2 * d], co[-1]
        return PhasePoint(t, x, tau_nat, xi_nat, h)

    if tag is ChartTag.DF_PROJECTIVE:
        d = (co.size - 3) // 2
        t, x = co[0], co[1 : 1 + d]
        rho_df, xi_hat, h = co[1 + d], co[2 + d : 2 + 2 * d], co[-1]
        if rho_df <= 0.0:
            raise OnBoundary("rho_df = 0: point on frequency infinity")
        tau_nat = cc.chart.sign / rho_df
        return PhasePoint(t, x, tau_nat, xi_hat / rho_df, h)

    if tag is ChartTag.PF_STANDARD:
        d = (co.size - 3) // 2
        t, x = co[0], co[1 : 1 + d]
        tau, xi, h = co[1 + d], co[2 + d : 2 + 2 * d], co[-1]
        if h <= 0.0:
            raise OnBoundary("h = 0: point on the parabolic face")
        return PhasePoint(t, x, h**2 * tau, h * xi, h)

    if tag is ChartTag.PF_NAT_PARABOLIC:
        d = (co.size - 3) // 2
        t, x = co[0], co[1 : 1 + d]
        rho_nf, xi_hat, rho_pf = co[1 + d], co[2 + d : 2 + 2 * d], co[-1]
        if rho_nf <= 0.0 or rho_pf <= 0.0:
            raise OnBoundary("rho_nf = 0 or rho_pf = 0: boundary point")
        h = rho_nf * rho_pf
        tau = cc.chart.sign / rho_nf**2
        xi = xi_hat / rho_nf
        return PhasePoint(t, x, h**2 * tau, h * xi, h)

    raise ChartUnavailable(
        f"from_chart does not handle {tag}; use from_parabolic_chart for "
        "frequency-space charts"
    )


def parabolic_chart(tau: float, xi, prefer: ChartId | None = None) -> ChartCoords:
    """Chart coordinates on the parabolic compactification of frequency space.

    The compactification adds a boundary sphere reached along parabolic rays
    (tau0 s^2, v s).  Chart selection: the tau-adapted chart when |tau|^(1/2)
    dominates every |xi_k|, otherwise the chart of the largest |xi_k|; pass
    ``prefer`` to force a particular chart.
    """
    xi = _as_vector(xi)
    d = xi.size
    if prefer is None:
        root = math.sqrt(abs(tau))
        k_best = int(np.argmax(np.abs(xi))) + 1 if d else 0
        if root >= (abs(xi[k_best - 1]) if d else 0.0) and tau != 0.0:
            prefer = ChartId(ChartTag.PAR_FREQ_TAU, sign=1 if tau > 0 else -1)
        elif d and xi[k_best - 1] != 0.0:
            prefer = ChartId(
                ChartTag.PAR_FREQ_XI, k=k_best, sign=1 if xi[k_best - 1] > 0 else -1
            )
        else:
            raise OutOfChart("(tau, xi) = 0 lies in no boundary-adapted chart")

    if prefer.tag is ChartTag.PAR_FREQ_TAU:
        sign = 1 if tau > 0 else -1
        if tau == 0.0:
            raise OutOfChart("ParFreqTau requires tau != 0")
        rho = (sign * tau) ** -0.5
        coords = np.concatenate(([rho], xi * rho))
        bdf = BdfValues(rho_df=rho, rho_bf=1.0, rho_nf=1.0, rho_pf=1.0)
        return ChartCoords(ChartId(ChartTag.PAR_FREQ_TAU, sign=sign), coords, bdf)

    if prefer.tag is ChartTag.PAR_FREQ_XI:
        k = prefer.k
        if not (1 <= k <= d) or xi[k - 1] == 0.0:
            raise OutOfChart(f"ParFreqXi({k}) requires xi_{k} != 0")
        sign = 1 if xi[k - 1] > 0 else -1
        rho = sign / xi[k - 1]
        tau_hat = tau / xi[k - 1] ** 2
        others = np.array([xi[j] / xi[k - 1] for j in range(d) if j != k - 1])
        coords = np.concatenate(([rho, tau_hat], others))
        bdf = BdfValues(rho_df=rho, rho_bf=1.0, rho_nf=1.0, rho_pf=1.0)
        return ChartCoords(ChartId(ChartTag.PAR_FREQ_XI, k=k, sign=sign), coords, bdf)

    raise ChartUnavailable(f"parabolic_chart does not handle {prefer.tag}")


def from_parabolic_chart(cc: ChartCoords) -> tuple[float, np.ndarray]:
    """Invert a frequency-space chart back to (tau, xi)."""
    co = cc.coords
    if cc.chart.tag is ChartTag.PAR_FREQ_TAU:
        rho = co[0]
        if rho <= 0.0:
            raise OnBoundary("rho = 0: point at frequency infinity")
        tau = cc.chart.sign / rho**2
        return tau, co[1:] / rho
    if cc.chart.tag is ChartTag.PAR_FREQ_XI:
        rho, tau_hat, others = co[0], co[1], co[2:]
        if rho <= 0.0:
            raise OnBoundary("rho = 0: point at frequency infinity")
        k = cc.chart.k
        xik = cc.chart.sign / rho
        xi = np.empty(others.size + 1)
        xi[k - 1] = xik
        idx = [j for j in range(xi.size) if j != k - 1]
        xi[idx] = others * xik
        return tau_hat * xik**2, xi
    raise ChartUnavailable(f"from_parabolic_chart does not handle {cc.chart.tag}")


@dataclass(frozen=True)
class ParabolicRay:
    """Parabolic ray (tau, xi)(s) = (tau0 s^2, v s) approaching the boundary."""

    tau0: float
    v: np.ndarray
    s_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", _as_vector(self.v))
        object.__setattr__(self, "s_values", _as_vector(self.s_values))

    def points(self) -> Iterable[tuple[float, np.ndarray]]:
        for s in self.s_values:
            yield self.tau0 * s**2, self.v * s


def _coordinate_field_b_coeffs(direction, cc: ChartCoords) -> np.ndarray:
    """Pushforward of d/dtau or d/dxi_k into a frequency chart, in the b-basis.

    The b-basis pairs the bdf coordinate with rho * d/drho and leaves the
    remaining (interior) coordinates untouched, so the returned coefficient
    vector measures the field as a b-vector field.
    """
    tag = cc.chart.tag
    sign = cc.chart.sign
    co = cc.coords
    if tag is ChartTag.PAR_FREQ_TAU:
        rho, xi_hat = co[0], co[1:]
        if direction == "tau":
            # d/dtau = -(sign) rho^3/2 d/drho - (sign) rho^2/2 xi_hat . d/dxi_hat
            return np.concatenate(([-sign * rho**2 / 2.0], -sign * rho**2 * xi_hat / 2.0))
        k = direction[1]
        e = np.zeros(xi_hat.size)
        e[k - 1] = rho
        return np.concatenate(([0.0], e))
    if tag is ChartTag.PAR_FREQ_XI:
        rho, tau_hat, others = co[0], co[1], co[2:]
        kc = cc.chart.k
        if direction == "tau":
            out = np.zeros(co.size)
            out[1] = rho**2
            return out
        k = direction[1]
        if k == kc:
            return np.concatenate(([-sign * rho], [-2.0 * sign * tau_hat * rho], -sign * others * rho))
        out = np.zeros(co.size)
        pos = 2 + sum(1 for j in range(1, k) if j != kc)
        out[pos] = rho
        return out
    raise ChartUnavailable(f"b-coefficients not defined for {tag}")


def b_order_fit(direction, chart: ChartId, ray: ParabolicRay) -> float:
    """Fitted decay exponent of a constant coordinate field at the boundary.

    ``direction`` is "tau" or ("xi", k).  The field d/dtau (resp. d/dxi_k)
    is pushed through the chart map at each ray point; a log-log fit of the
    b-basis coefficient magnitude against the local bdf gives the returned
    exponent (expected: 2 for d/dtau, 1 for d/dxi_k).
    """
    rhos, mags = [], []
    for tau, xi in ray.points():
        try:
            cc = parabolic_chart(tau, xi, prefer=chart)
        except OutOfChart:
            continue
        coeffs = _coordinate_field_b_coeffs(direction, cc)
        rho = cc.coords[0]
        mag = float(np.linalg.norm(coeffs))
        if rho > 0 and mag > 0:
            rhos.append(rho)
            mags.append(mag)
    if len(rhos) < 3:
        raise FitFailure("need at least 3 ray samples inside the chart")
    lr = np.log(np.asarray(rhos))
    if lr.max() - lr.min() < 1.0:
        raise FitFailure("insufficient dynamic range along the ray")
    slope = np.polyfit(lr, np.log(np.asarray(mags)), 1)[0]
    return float(slope)
