"""Closed-form Gaussian moments of the activation families.

Each moment of phi(z) for z ~ N(0, q) is assembled from exact integrals of
polynomials against the standard-normal density over the linear segment plus
the point mass the clip puts on the saturated tail.  Quadrature never enters
here; the quadrature route lives in :mod:`eoc_lab.gaussian` and the test
suite holds the two against each other.

Conventions used throughout, writing a = tau / sqrt(q), b = (tau+m) / sqrt(q),
g for the standard-normal pdf and Phi for its cdf:

    one-sided second moment  = (q + tau^2) (Phi(b) - Phi(a))
                               + sqrt(q) (tau - m) g(b) - sqrt(q) tau g(a)
                               + m^2 (1 - Phi(b))

with the analogous quartic expansion for the fourth moment.  The two-sided
family doubles the one-sided value of its own threshold by symmetry, and
relu is the tau = 0, m -> inf limit (q/2 and 3 q^2 / 2).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .activations import CRELU, CST, RELU, ActivationSpec

_SQRT2PI = math.sqrt(2.0 * math.pi)


def _phi_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


def _segment_power_integrals(a: float, b: float) -> tuple[float, ...]:
    """Integrals of z^k g(z) dz over [a, b] for k = 0..4."""
    ga, gb = _phi_pdf(a), _phi_pdf(b)
    pa, pb = float(ndtr(a)), float(ndtr(b))
    i0 = pb - pa
    i1 = ga - gb
    i2 = i0 + a * ga - b * gb
    i3 = (a * a + 2.0) * ga - (b * b + 2.0) * gb
    i4 = 3.0 * i0 + (a ** 3 + 3.0 * a) * ga - (b ** 3 + 3.0 * b) * gb
    return i0, i1, i2, i3, i4


def _one_sided_second(tau: float, m: float, q: float) -> float:
    sq = math.sqrt(q)
    a, b = tau / sq, (tau + m) / sq
    i0, i1, i2, _, _ = _segment_power_integrals(a, b)
    linear = q * i2 - 2.0 * sq * tau * i1 + tau * tau * i0
    return linear + m * m * (1.0 - float(ndtr(b)))


def _one_sided_fourth(tau: float, m: float, q: float) -> float:
    sq = math.sqrt(q)
    a, b = tau / sq, (tau + m) / sq
    i0, i1, i2, i3, i4 = _segment_power_integrals(a, b)
    linear = (
        q * q * i4
        - 4.0 * q * sq * tau * i3
        + 6.0 * q * tau * tau * i2
        - 4.0 * sq * tau ** 3 * i1
        + tau ** 4 * i0
    )
    return linear + m ** 4 * (1.0 - float(ndtr(b)))


def _check_q(q: float) -> float:
    q = float(q)
    if not math.isfinite(q) or q <= 0.0:
        raise ValueError(f"variance must be positive and finite, got {q}")
    return q


def second_moment(spec: ActivationSpec, q: float) -> float:
    """E[phi(z)^2] for z ~ N(0, q)."""
    q = _check_q(q)
    if spec.kind == RELU:
        return 0.5 * q
    one = _one_sided_second(spec.tau, spec.m, q)
    return 2.0 * one if spec.kind == CST else one


def fourth_moment(spec: ActivationSpec, q: float) -> float:
    """E[phi(z)^4] for z ~ N(0, q)."""
    q = _check_q(q)
    if spec.kind == RELU:
        return 1.5 * q * q
    one = _one_sided_fourth(spec.tau, spec.m, q)
    return 2.0 * one if spec.kind == CST else one


def linear_region_probability(spec: ActivationSpec, q: float) -> float:
    """P(phi'(z) = 1) for z ~ N(0, q).

    The derivative is {0, 1}-valued, so this single probability equals
    E[phi'(z)^(2k)] for every k >= 1.
    """
    q = _check_q(q)
    if spec.kind == RELU:
        return 0.5
    sq2q = math.sqrt(2.0 * q)
    half = 0.5 * (math.erf((spec.tau + spec.m) / sq2q) - math.erf(spec.tau / sq2q))
    return 2.0 * half if spec.kind == CST else half


def _one_sided_first_shifted(tau: float, m: float, mu, sigma: float):
    """E[clip(x - tau, 0, m)] for x ~ N(mu, sigma^2), vectorised over mu."""
    mu = np.asarray(mu, dtype=float)
    alpha = (tau - mu) / sigma
    beta = (tau + m - mu) / sigma
    ga = np.exp(-0.5 * alpha * alpha) / _SQRT2PI
    gb = np.exp(-0.5 * beta * beta) / _SQRT2PI
    pa, pb = ndtr(alpha), ndtr(beta)
    return (mu - tau) * (pb - pa) + sigma * (ga - gb) + m * (1.0 - pb)


def first_moment_shifted(spec: ActivationSpec, mu, sigma: float):
    """E[phi(x)] for x ~ N(mu, sigma^2), vectorised over mu.

    This is the exact inner integral of the two-input correlation map once
    the second Gaussian coordinate has been integrated out.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if spec.kind == RELU:
        mu = np.asarray(mu, dtype=float)
        alpha = -mu / sigma
        return mu * ndtr(-alpha) + sigma * np.exp(-0.5 * alpha * alpha) / _SQRT2PI
    if spec.kind == CRELU:
        return _one_sided_first_shifted(spec.tau, spec.m, mu, sigma)
    pos = _one_sided_first_shifted(spec.tau, spec.m, mu, sigma)
    neg = _one_sided_first_shifted(spec.tau, spec.m, -np.asarray(mu, dtype=float), sigma)
    return pos - neg
