"""Sparsity-inducing activation families.

Three pointwise nonlinearities are supported:

* ``relu``:   max(x, 0)
* ``crelu``:  a shifted and clipped ReLU.  Zero below the threshold tau,
  linear with unit slope on [tau, tau + m], constant at the clip level m
  above.  Outputs are exactly zero with probability Phi(tau / sqrt(q)) when
  the input is N(0, q), which is how a target sparsity is dialled in.
* ``cst``:    the odd (two-sided) counterpart, a clipped soft-threshold.
  Zero on |x| < tau, sign(x) * (|x| - tau) on tau <= |x| <= tau + m and
  sign(x) * m beyond.

Derivatives are indicator functions of the linear segments.  At the kink
points themselves the derivative is defined to be 0; the kinks carry no
Gaussian measure, so every integral in the package is insensitive to the
choice, and 0 matches the subgradient the trainer uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RELU = "relu"
CRELU = "crelu"
CST = "cst"
KINDS = (RELU, CRELU, CST)


@dataclass(frozen=True)
class ActivationSpec:
    """An activation family plus its shape parameters.

    ``tau`` and ``m`` are ignored for ``relu`` (stored as 0 and inf so the
    piecewise definitions coincide).  Instances are immutable value types.
    """

    kind: str
    tau: float = 0.0
    m: float = math.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == RELU:
            object.__setattr__(self, "tau", 0.0)
            object.__setattr__(self, "m", math.inf)
            return
        if not (self.tau >= 0.0 and math.isfinite(self.tau)):
            raise ValueError("tau must be a finite nonnegative threshold")
        if not (self.m > 0.0 and math.isfinite(self.m)):
            raise ValueError("m must be a finite positive clip level")

    @classmethod
    def relu(cls) -> "ActivationSpec":
        return cls(RELU)

    @classmethod
    def crelu(cls, tau: float, m: float) -> "ActivationSpec":
        return cls(CRELU, float(tau), float(m))

    @classmethod
    def cst(cls, tau: float, m: float) -> "ActivationSpec":
        return cls(CST, float(tau), float(m))

    @property
    def odd(self) -> bool:
        """Whether the activation is an odd function of its input."""
        return self.kind == CST

    def evaluate(self, x):
        """Pointwise activation value; accepts scalars or arrays."""
        x = np.asarray(x, dtype=float)
        if self.kind == RELU:
            out = np.maximum(x, 0.0)
        elif self.kind == CRELU:
            out = np.clip(x - self.tau, 0.0, self.m)
        else:
            out = np.sign(x) * np.clip(np.abs(x) - self.tau, 0.0, self.m)
        return out if out.ndim else float(out)

    def derivative(self, x):
        """Pointwise derivative, an indicator of the open linear segments.

        Returns 0 at the kink points (and at the origin for relu).
        """
        x = np.asarray(x, dtype=float)
        if self.kind == RELU:
            out = (x > 0.0).astype(float)
        elif self.kind == CRELU:
            out = ((x > self.tau) & (x < self.tau + self.m)).astype(float)
        else:
            ax = np.abs(x)
            out = ((ax > self.tau) & (ax < self.tau + self.m)).astype(float)
        return out if out.ndim else float(out)

    def __call__(self, x):
        return self.evaluate(x)

    def kinks(self) -> tuple[float, ...]:
        """Input locations where the activation is not differentiable."""
        if self.kind == RELU:
            return (0.0,)
        if self.kind == CRELU:
            return (self.tau, self.tau + self.m)
        return (-self.tau - self.m, -self.tau, self.tau, self.tau + self.m)

    def zero_probability(self, q: float) -> float:
        """P(activation output is exactly 0) for an N(0, q) input."""
        from scipy.special import erf, ndtr

        if q <= 0.0:
            raise ValueError("variance must be positive")
        if self.kind == RELU:
            return 0.5
        if self.kind == CRELU:
            return float(ndtr(self.tau / math.sqrt(q)))
        return float(erf(self.tau / math.sqrt(2.0 * q)))

    def to_dict(self) -> dict:
        if self.kind == RELU:
            return {"kind": RELU, "tau": 0.0, "m": None}
        return {"kind": self.kind, "tau": self.tau, "m": self.m}

    @classmethod
    def from_dict(cls, data: dict) -> "ActivationSpec":
        kind = data["kind"]
        if kind == RELU:
            return cls.relu()
        return cls(kind, float(data["tau"]), float(data["m"]))
