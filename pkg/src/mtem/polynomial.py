"""Scalar coefficient family built from monomials over ``(1 + t)``.

Drift ``f(x, y, t) = sum_i c_i x^a_i y^b_i / (1 + t)`` and diffusion
``g(x, y, t) = sqrt(sum_j c_j x^a_j y^b_j / (1 + t))``.  Both worked examples
belong to this family, and so do CLI inline problems.  Exponents are
non-negative integers and powers are formed by repeated multiplication so the
numpy callables and the compiled kernel agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CoefficientSet

__all__ = ["PolynomialFamily", "ipow"]


def ipow(x, p: int):
    out = np.ones_like(x) if isinstance(x, np.ndarray) else 1.0
    for _ in range(p):
        out = out * x
    return out


def _terms(raw, width):
    rows = [tuple(r) for r in raw]
    for r in rows:
        if len(r) != width:
            raise ValueError(f"term {r} must have {width} entries")
    return tuple((float(r[0]),) + tuple(int(v) for v in r[1:]) for r in rows)


def _monomial_sum(terms, x, y):
    acc = 0.0
    for c, a, b in terms:
        acc = acc + (c * ipow(x, a)) * ipow(y, b)
    return acc


@dataclass(frozen=True)
class PolynomialFamily:
    """Declared structure of a scalar polynomial problem.

    ``drift_terms`` and ``diffusion_terms`` are ``(c, a, b)`` triples;
    ``lipschitz_terms`` are ``(c, p)`` pairs giving ``L_{R,t} = sum c R^p / (1 + t)``.
    """

    drift_terms: tuple
    diffusion_terms: tuple
    lipschitz_terms: tuple
    K: float = 0.0
    lambda0: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "drift_terms", _terms(self.drift_terms, 3))
        object.__setattr__(self, "diffusion_terms", _terms(self.diffusion_terms, 3))
        object.__setattr__(self, "lipschitz_terms", _terms(self.lipschitz_terms, 2))
        for c, a, b in self.drift_terms + self.diffusion_terms:
            if a < 0 or b < 0:
                raise ValueError("monomial exponents must be non-negative integers")

    def drift(self, x, y, t):
        return _monomial_sum(self.drift_terms, x, y) / (1.0 + t)

    def diffusion(self, x, y, t):
        return np.sqrt(_monomial_sum(self.diffusion_terms, x, y) / (1.0 + t))[..., None]

    def lipschitz(self, r, t):
        acc = 0.0
        for c, p in self.lipschitz_terms:
            acc += c * r ** p
        return acc / (1.0 + t)

    def arrays(self):
        """Term tables as ``(coef, x_exp, y_exp)`` arrays for the compiled kernel."""
        def split(terms):
            if not terms:
                return np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64)
            c, a, b = zip(*terms)
            return np.array(c, float), np.array(a, np.int64), np.array(b, np.int64)
        return split(self.drift_terms) + split(self.diffusion_terms)

    def coefficients(self) -> CoefficientSet:
        return CoefficientSet(n=1, d=1, drift=self.drift, diffusion=self.diffusion, K=self.K,
                              lambda0=self.lambda0, lambda1=self.lambda1, lambda2=self.lambda2,
                              lipschitz=self.lipschitz, polynomial=self)

    def to_dict(self):
        return {"drift": [list(t) for t in self.drift_terms],
                "diffusion": [list(t) for t in self.diffusion_terms],
                "lipschitz": [list(t) for t in self.lipschitz_terms],
                "K": self.K, "lambda0": self.lambda0, "lambda1": self.lambda1,
                "lambda2": self.lambda2}
