"""
Univariate kernels k0 and their p-variate product form.

Two families are provided:

- ``scaled_gaussian()``: k0(u) = (4 pi)^(-1/2) exp(-u^2 / 4), the N(0, 2) density.
- ``piecewise_joe(p)``: the tent-shaped piecewise-linear kernel

      k0(u) = eta1 + eta2 |u|     for |u| < xi1
      k0(u) = eta3 - eta4 |u|     for xi1 <= |u| < xi2
      k0(u) = 0                   otherwise

  whose constants solve unit mass, unit second moment, continuity at xi1,
  k0(xi2) = 0, k0(0) = kappa02 / 2^(1/p) and int v^2 k0^2 / kappa02 = 1.

Constants for the piecewise family are read from ``data/kernel_constants.json``
when present (written by ``scripts/derive_kernel_constants.py``); otherwise they
are solved on first use and cached.
"""

import json
import os
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, Optional

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, ParameterError
from .quadrature import integrate

SCALED_GAUSSIAN = "scaled_gaussian"
PIECEWISE_JOE = "piecewise_joe"

CONSTANTS_PATH = os.path.join(os.path.dirname(__file__), 'data', 'kernel_constants.json')
CONSTRAINT_TOL = 1e-6
MAX_JOE_DIM = 4


@dataclass(frozen=True)
class KernelSpec:
    """A univariate kernel with its precomputed constants."""
    family: str
    p: Optional[int] = None  # dimension the piecewise constants were solved for
    eta1: float = 0.0
    eta2: float = 0.0
    eta3: float = 0.0
    eta4: float = 0.0
    xi1: float = 0.0
    xi2: float = 0.0
    k00: float = 0.0  # k0(0)
    kappa02: float = 0.0  # int k0^2

    @property
    def support_radius(self) -> float:
        """Half-width of the support of k0 (inf for the Gaussian)."""
        return self.xi2 if self.family == PIECEWISE_JOE else np.inf

    def k0(self, u: np.ndarray) -> np.ndarray:
        """Evaluate k0 elementwise."""
        u = np.asarray(u, dtype=float)
        if self.family == SCALED_GAUSSIAN:
            return np.exp(-0.25 * u * u) / np.sqrt(4.0 * np.pi)
        a = np.abs(u)
        inner = self.eta1 + self.eta2 * a
        outer = self.eta3 - self.eta4 * a
        return np.where(a < self.xi1, inner, np.where(a < self.xi2, outer, 0.0))

    def product(self, u: np.ndarray) -> np.ndarray:
        """K_p(u) = prod_j k0(u_j) over the last axis of u."""
        return np.prod(self.k0(u), axis=-1)

    def kappa2(self, p: int) -> float:
        """int K_p^2 = kappa02^p."""
        return float(self.kappa02 ** p)

    def integration_range(self):
        """Range and kink locations used by quadrature checks."""
        if self.family == SCALED_GAUSSIAN:
            return -20.0, 20.0, None
        return -self.xi2, self.xi2, [-self.xi1, 0.0, self.xi1]


def scaled_gaussian() -> KernelSpec:
    """The Gaussian competitor kernel (variance 2).

    Satisfies symmetry, unit mass and the v^2 k0^2 condition; its second
    moment is 2, so it does not meet the unit-variance condition.
    """
    return KernelSpec(
        family=SCALED_GAUSSIAN,
        k00=1.0 / np.sqrt(4.0 * np.pi),
        kappa02=1.0 / (2.0 * np.sqrt(2.0 * np.pi)),
    )


def product_kernel(spec: KernelSpec, p: int, u) -> float:
    """K_p(u) for a single p-vector u."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != p:
        raise ParameterError(f"expected a {p}-vector, got length {u.shape[0]}")
    if not np.all(np.isfinite(u)):
        raise ParameterError("kernel argument must be finite")
    return float(spec.product(u))


# --------------------------------------------------------------------------
# Piecewise-linear family
# --------------------------------------------------------------------------

def _shape_moments(t: float, r: float) -> Dict[str, float]:
    """Moments of the unit shape g with g(0)=1, g(t)=r, g(1)=0 (piecewise linear, even).

    m0 = int g, m2 = int u^2 g, q0 = int g^2, q2 = int u^2 g^2.
    """
    return {
        'm0': t + r,
        'm2': (t ** 3 + r * (1.0 + t + t * t)) / 6.0,
        'q0': 2.0 * (t + t * r + r * r) / 3.0,
        'q2': (t ** 3 * (6.0 * r * r + 3.0 * r + 1.0)
               + r * r * (1.0 - t) * (1.0 + 3.0 * t + 6.0 * t * t)) / 15.0,
    }


def _shoulder_ratio(t: float, c: float) -> float:
    """Positive root r of q0 / m0 = c, i.e. 2 r^2 + (2t - 3c) r + t (2 - 3c) = 0."""
    b = 2.0 * t - 3.0 * c
    disc = b * b - 8.0 * t * (2.0 - 3.0 * c)
    return (-b + np.sqrt(disc)) / 4.0


def _moment_balance(t: float, c: float) -> float:
    r = _shoulder_ratio(t, c)
    mom = _shape_moments(t, r)
    return mom['m0'] * mom['q2'] - mom['m2'] * mom['q0']


def solve_joe_constants(p: int) -> Dict[str, float]:
    """Solve the constraint system for the piecewise kernel of dimension p.

    The kernel is written as k0(u) = A g(|u| / s) with g the unit shape of
    ``_shape_moments``. Condition (k0(0) = kappa02 / 2^(1/p)) fixes the
    shoulder ratio r given the knot ratio t = xi1 / xi2; equality of the
    second moment and the v^2 k0^2 moment then fixes t by a bracketed root
    search; unit mass and unit variance fix A and s.

    Raises:
        ConfigurationError: If no bracketing interval is found
    """
    if not 1 <= p <= MAX_JOE_DIM:
        raise ParameterError(f"piecewise kernel is defined for p in 1..{MAX_JOE_DIM}, got {p}")
    c = 2.0 ** (1.0 / p)
    grid = np.linspace(1e-3, 1.0 - 1e-3, 999)
    values = np.array([_moment_balance(t, c) for t in grid])
    sign_change = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]
    if sign_change.size == 0:
        raise ConfigurationError(
            f"no knot ratio balances the moment conditions for p={p}",
            residuals=[float(values.min()), float(values.max())]
        )
    lo, hi = grid[sign_change[0]], grid[sign_change[0] + 1]
    t = optimize.brentq(_moment_balance, lo, hi, args=(c,), xtol=1e-15, rtol=1e-15)

    r = _shoulder_ratio(t, c)
    mom = _shape_moments(t, r)
    s = np.sqrt(mom['m0'] / mom['m2'])
    amp = 1.0 / (s * mom['m0'])
    xi1, xi2 = t * s, s
    shoulder = amp * r
    return {
        'eta1': float(amp),
        'eta2': float((shoulder - amp) / xi1),
        'eta3': float(shoulder * xi2 / (xi2 - xi1)),
        'eta4': float(shoulder / (xi2 - xi1)),
        'xi1': float(xi1),
        'xi2': float(xi2),
        'k00': float(amp),
        'kappa02': float(amp * amp * s * mom['q0']),
    }


def load_constants_table(path: str = CONSTANTS_PATH) -> Dict[int, Dict[str, float]]:
    """Read the frozen constants table, keyed by p. Missing file gives an empty table."""
    if not os.path.exists(path):
        return {}
    with open(path, 'r') as f:
        data = json.load(f)
    return {int(p): entry['constants'] for p, entry in data.get(PIECEWISE_JOE, {}).items()}


def save_constants_table(path: str = CONSTANTS_PATH, dims=range(1, MAX_JOE_DIM + 1)) -> dict:
    """Solve every dimension and write the constants with their constraint residuals."""
    table = {}
    for p in dims:
        spec = KernelSpec(family=PIECEWISE_JOE, p=p, **solve_joe_constants(p))
        constants = {k: v for k, v in asdict(spec).items() if k not in ('family', 'p')}
        table[str(p)] = {
            'constants': constants,
            'residuals': constraint_residuals(spec),
        }
    data = {PIECEWISE_JOE: table}
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
    return data


@lru_cache(maxsize=None)
def piecewise_joe(p: int) -> KernelSpec:
    """The piecewise-linear kernel tuned for dimension p (1..4)."""
    if not 1 <= p <= MAX_JOE_DIM:
        raise ParameterError(f"piecewise kernel is defined for p in 1..{MAX_JOE_DIM}, got {p}")
    table = load_constants_table()
    constants = table.get(p) or solve_joe_constants(p)
    spec = KernelSpec(family=PIECEWISE_JOE, p=p, **constants)
    residuals = constraint_residuals(spec)
    bad = {k: v for k, v in residuals.items() if abs(v) > CONSTRAINT_TOL}
    if bad:
        raise ConfigurationError(
            f"piecewise kernel constants for p={p} violate constraints {sorted(bad)}",
            residuals=list(bad.values())
        )
    return spec


def kernel_by_name(name: str, p: int = 1) -> KernelSpec:
    """Resolve a CLI/config kernel name."""
    if name in (SCALED_GAUSSIAN, 'gaussian'):
        return scaled_gaussian()
    if name in (PIECEWISE_JOE, 'joe'):
        return piecewise_joe(p)
    raise ParameterError(f"Unknown kernel: {name!r}")


def constraint_residuals(spec: KernelSpec) -> Dict[str, float]:
    """Residual of every kernel condition, computed by quadrature.

    Keys: symmetry, unit_mass, second_moment, condition4, condition5, outer_knot.
    For the Gaussian the second moment and condition4 residuals are reported
    but are not expected to vanish.
    """
    lo, hi, kinks = spec.integration_range()
    p = spec.p or 1
    grid = np.linspace(0.0, min(hi, 10.0), 101)
    mass = integrate(spec.k0, lo, hi, breakpoints=kinks)
    second = integrate(lambda u: u * u * spec.k0(u), lo, hi, breakpoints=kinks)
    kappa02 = integrate(lambda u: spec.k0(u) ** 2, lo, hi, breakpoints=kinks)
    v2 = integrate(lambda u: u * u * spec.k0(u) ** 2, lo, hi, breakpoints=kinks)
    outer = float(spec.eta3 - spec.eta4 * spec.xi2) if spec.family == PIECEWISE_JOE else 0.0
    return {
        'symmetry': float(np.max(np.abs(spec.k0(grid) - spec.k0(-grid)))),
        'unit_mass': mass - 1.0,
        'second_moment': second - 1.0,
        'condition4': float(spec.k0(0.0)) - kappa02 / 2.0 ** (1.0 / p),
        'condition5': v2 / kappa02 - 1.0,
        'outer_knot': outer,
    }
