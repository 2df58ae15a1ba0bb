"""Solve for complete critical initialisations and locate fixed points.

A critical initialisation is pinned down by three conditions:

1. the threshold tau is set from the target zero-activation rate s at the
   chosen fixed-point variance q*,
2. the weight gain sw2 makes the perturbation growth factor chi1(q*) equal
   to 1 (the gain has a closed form, the reciprocal of the linear-region
   probability),
3. the bias variance sb2 places the fixed point: sb2 = q* - sw2 E[phi^2].

What remains is the clip level m.  ``solve_init`` chooses it by 1D bracketed
root finding so that the variance-map slope at the fixed point hits a user
target in (0, 1).  The slope equation is solved in the one-sided threshold
convention for both clipped families: the residual

    g(m) = 1 - (2 m / sqrt(2 pi q)) exp(-(t+m)^2 / 2q)
               / [erf((t+m)/sqrt(2q)) - erf(t/sqrt(2q))]  -  target,

with t = sqrt(q) Phi^{-1}(s), is what the reference parameter grids for both
families were generated from, so both families share the same solved m at
equal (s, target, q*).  The two-sided family then receives its own threshold
tau = sqrt(2 q*) erfinv(s) and gain, which means its achieved slope at q*
differs from the nominal target; the achieved value is what is stored in
``v_prime_at_fp``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _moments, maps
from .activations import CRELU, CST, RELU, ActivationSpec
from .config import DEFAULT_TOLERANCES
from .gaussian import erf_inv, normal_quantile

M_BRACKET = (1e-4, 50.0)


class InfeasibleTargetError(ValueError):
    """Raised when no valid initialisation exists for the requested targets."""


@dataclass(frozen=True)
class EocInit:
    """A complete critical initialisation.

    Invariants (validated on construction for the clipped families):
    chi1(q*) = 1 and V(q*) = q* to within the fixed-point tolerance.
    ``v_prime_at_fp`` is the achieved slope V'(q*), which for the one-sided
    family equals the requested target up to root-finder tolerance.
    """

    spec: ActivationSpec
    q_star: float
    sw2: float
    sb2: float
    s: float
    v_prime_at_fp: float

    def to_dict(self) -> dict:
        return {
            "activation": self.spec.to_dict(),
            "q_star": self.q_star,
            "sw2": self.sw2,
            "sb2": self.sb2,
            "s": self.s,
            "v_prime_at_fp": self.v_prime_at_fp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EocInit":
        return cls(
            spec=ActivationSpec.from_dict(data["activation"]),
            q_star=float(data["q_star"]),
            sw2=float(data["sw2"]),
            sb2=float(data["sb2"]),
            s=float(data["s"]),
            v_prime_at_fp=float(data["v_prime_at_fp"]),
        )


def sparsity_threshold(kind: str, s: float, q_star: float) -> float:
    """Threshold inducing zero-activation rate s at variance q*.

    One-sided family: sqrt(q*) Phi^{-1}(s).  Two-sided family:
    sqrt(2 q*) erfinv(s).  relu has no threshold and pins s = 1/2.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"sparsity must lie in (0, 1), got {s}")
    if q_star <= 0.0:
        raise ValueError(f"q_star must be positive, got {q_star}")
    if kind == CRELU:
        return math.sqrt(q_star) * normal_quantile(s)
    if kind == CST:
        return math.sqrt(2.0 * q_star) * erf_inv(s)
    if kind == RELU:
        return 0.0
    raise ValueError(f"unknown activation kind {kind!r}")


def critical_gain(spec: ActivationSpec, q_star: float) -> float:
    """The weight variance making chi1(q*) = 1, in closed form."""
    p = _moments.linear_region_probability(spec, q_star)
    if p <= 0.0:
        raise InfeasibleTargetError("activation is fully saturated; chi1 cannot reach 1")
    return 1.0 / p


def _slope_residual(t: float, m: float, q: float, target: float) -> float:
    """Slope-at-fixed-point minus target, one-sided threshold convention."""
    denom = math.erf((t + m) / math.sqrt(2.0 * q)) - math.erf(t / math.sqrt(2.0 * q))
    deficit = (
        2.0 * m / math.sqrt(2.0 * math.pi * q) * math.exp(-((t + m) ** 2) / (2.0 * q)) / denom
    )
    return (1.0 - deficit) - target


def _solve_clip_level(s: float, q_star: float, v_prime_target: float) -> float:
    t = math.sqrt(q_star) * normal_quantile(s)
    lo, hi = M_BRACKET
    f_lo = _slope_residual(t, lo, q_star, v_prime_target)
    f_hi = _slope_residual(t, hi, q_star, v_prime_target)
    if f_lo * f_hi > 0.0:
        raise InfeasibleTargetError(
            f"no clip level in ({lo}, {hi}) achieves slope {v_prime_target} "
            f"at s={s}, q*={q_star}"
        )
    return float(
        brentq(
            lambda m: _slope_residual(t, m, q_star, v_prime_target),
            lo,
            hi,
            xtol=DEFAULT_TOLERANCES.root_xtol,
            rtol=8.9e-16,
        )
    )


def _finish_init(spec: ActivationSpec, s: float, q_star: float) -> EocInit:
    sw2 = critical_gain(spec, q_star)
    sb2 = q_star - sw2 * _moments.second_moment(spec, q_star)
    if sb2 < 0.0:
        raise InfeasibleTargetError(
            f"required bias variance is negative ({sb2:.6g}); "
            f"the fixed point q*={q_star} is unreachable for this activation"
        )
    init = EocInit(
        spec=spec,
        q_star=q_star,
        sw2=sw2,
        sb2=sb2,
        s=s,
        v_prime_at_fp=maps.v_prime(spec, sw2, q_star),
    )
    validate_init(init)
    return init


def validate_init(init: EocInit, tol: float | None = None) -> None:
    """Check both criticality conditions; raises on violation."""
    tol = DEFAULT_TOLERANCES.fixed_point if tol is None else tol
    c = maps.chi1(init.spec, init.sw2, init.q_star)
    v = maps.v_map(init.spec, init.sw2, init.sb2, init.q_star)
    if abs(c - 1.0) > tol:
        raise InfeasibleTargetError(f"chi1(q*) = {c!r} deviates from 1 beyond {tol}")
    if abs(v - init.q_star) > tol * max(1.0, init.q_star):
        raise InfeasibleTargetError(f"V(q*) = {v!r} deviates from q* beyond {tol}")


def solve_init(kind: str, s: float, q_star: float, v_prime_target: float) -> EocInit:
    """Full initialisation from targets (s, q*, slope at the fixed point).

    Valid for the two clipped families.  relu has its slope pinned to 1 by
    criticality, so there is nothing to solve; use :func:`relu_init`.
    """
    if kind == RELU:
        raise InfeasibleTargetError(
            "relu has V'(q*) = chi1(q*) = 1 identically; use relu_init(q_star)"
        )
    if kind not in (CRELU, CST):
        raise ValueError(f"unknown activation kind {kind!r}")
    if not 0.0 < s < 1.0:
        raise ValueError(f"sparsity must lie in (0, 1), got {s}")
    if not 0.0 < v_prime_target < 1.0:
        raise ValueError(f"slope target must lie in (0, 1), got {v_prime_target}")
    if q_star <= 0.0:
        raise ValueError(f"q_star must be positive, got {q_star}")

    m = _solve_clip_level(s, q_star, v_prime_target)
    tau = sparsity_threshold(kind, s, q_star)
    spec = ActivationSpec(kind, tau, m)
    return _finish_init(spec, s, q_star)


def init_from_m(kind: str, s: float, q_star: float, m: float) -> EocInit:
    """Critical initialisation with the clip level given directly.

    Used by parameter sweeps, where the (q*, m) plane is scanned with the
    gain re-solved cell by cell.
    """
    if kind not in (CRELU, CST):
        raise ValueError(f"unknown activation kind {kind!r}")
    tau = sparsity_threshold(kind, s, q_star)
    spec = ActivationSpec(kind, tau, m)
    return _finish_init(spec, s, q_star)


def relu_init(q_star: float) -> EocInit:
    """The unique critical relu initialisation: sw2 = 2, sb2 = 0.

    V(q) = q holds identically, so every variance is a (marginal) fixed
    point and the stored q* only anchors input scaling downstream.
    """
    if q_star <= 0.0:
        raise ValueError(f"q_star must be positive, got {q_star}")
    spec = ActivationSpec.relu()
    init = EocInit(
        spec=spec, q_star=q_star, sw2=2.0, sb2=0.0, s=0.5, v_prime_at_fp=1.0
    )
    validate_init(init)
    return init


@dataclass(frozen=True)
class FixedPoint:
    q: float
    slope: float
    stable: bool


@dataclass(frozen=True)
class FixedPointReport:
    """All fixed points of V found in a search interval.

    ``degenerate_line`` flags the relu case where V(q) - q vanishes
    identically and every point of the interval is a marginal fixed point.
    """

    points: tuple[FixedPoint, ...]
    search_interval: tuple[float, float]
    degenerate_line: bool = False

    def to_dict(self) -> dict:
        return {
            "points": [
                {"q": p.q, "slope": p.slope, "stable": p.stable} for p in self.points
            ],
            "search_interval": list(self.search_interval),
            "degenerate_line": self.degenerate_line,
        }


def find_fixed_points(
    init: EocInit,
    lo: float | None = None,
    hi: float | None = None,
    grid: int = 2000,
) -> FixedPointReport:
    """Locate all solutions of V(q) = q in [lo, hi].

    A sign-change scan on a dense grid brackets each root and bisection
    (Brent) refines it.  The anchoring fixed point q* is always included.
    """
    lo = init.q_star / 20.0 if lo is None else float(lo)
    hi = init.q_star * 20.0 if hi is None else float(hi)
    if not (0.0 < lo < init.q_star < hi):
        raise ValueError("need 0 < lo < q* < hi")
    grid = max(int(grid), 1000)

    spec, sw2, sb2 = init.spec, init.sw2, init.sb2

    def resid(q: float) -> float:
        return maps.v_map(spec, sw2, sb2, q) - q

    qs = np.linspace(lo, hi, grid + 1)
    vals = np.array([resid(q) for q in qs])

    tol_line = 1e-9 * max(1.0, hi)
    if np.all(np.abs(vals) <= tol_line):
        point = FixedPoint(q=init.q_star, slope=maps.v_prime(spec, sw2, init.q_star), stable=False)
        return FixedPointReport(points=(point,), search_interval=(lo, hi), degenerate_line=True)

    roots: list[float] = [init.q_star]
    report_tol = DEFAULT_TOLERANCES.fixed_point_report
    for i in range(grid):
        a, b, fa, fb = qs[i], qs[i + 1], vals[i], vals[i + 1]
        if fa == 0.0:
            root = float(a)
        elif fa * fb < 0.0:
            root = float(brentq(resid, a, b, xtol=1e-12, rtol=8.9e-16))
        else:
            continue
        if all(abs(root - r) > 1e-6 * max(1.0, root) for r in roots):
            if abs(resid(root)) <= report_tol * max(1.0, root):
                roots.append(root)

    points = tuple(
        FixedPoint(
            q=r,
            slope=maps.v_prime(spec, sw2, r),
            stable=abs(maps.v_prime(spec, sw2, r)) < 1.0,
        )
        for r in sorted(roots)
    )
    return FixedPointReport(points=points, search_interval=(lo, hi))
