"""Mode containers, normalization and stability labels."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

MARGINAL_BAND = 0.5  # rad/s


class Stability(str, Enum):
    STABLE = "Stable"
    MARGINAL = "Marginal"
    UNSTABLE = "Unstable"


def classify_stability(omega: complex, band: float = MARGINAL_BAND) -> Stability:
    """Label by growth rate; ``Im w > 0`` grows under the ``e^{-i w t}`` convention."""
    if omega.imag > band:
        return Stability.UNSTABLE
    if omega.imag < -band:
        return Stability.STABLE
    return Stability.MARGINAL


def normalize_shape(p: np.ndarray) -> np.ndarray:
    """Scale so the largest-modulus entry equals exactly 1."""
    p = np.asarray(p, dtype=complex)
    k = int(np.argmax(np.abs(p)))
    out = p / p[k]
    out[k] = 1.0
    return out


def principal_sqrt(lam: complex) -> complex:
    """Square root on the branch ``Re >= 0`` (``Im >= 0`` when ``Re == 0``)."""
    w = complex(np.sqrt(complex(lam)))
    if w.real < 0 or (w.real == 0 and w.imag < 0):
        w = -w
    return w


@dataclass
class Mode:
    omega: complex
    shape: np.ndarray
    residual: float
    stability: Stability = None
    history: list = field(default_factory=list)
    converged: bool = True

    def __post_init__(self):
        self.omega = complex(self.omega)
        if self.stability is None:
            self.stability = classify_stability(self.omega)

    @property
    def frequency_hz(self) -> float:
        return self.omega.real / (2 * math.pi)

    @property
    def growth_rate(self) -> float:
        return self.omega.imag


@dataclass
class ModeSet:
    """Modes ordered by distance from the target, plus solver diagnostics."""

    modes: list
    target: complex = 0j
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.modes = sorted(self.modes, key=lambda m: abs(m.omega - self.target))

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes], dtype=complex)

    def by_frequency(self) -> list:
        return sorted(self.modes, key=lambda m: (m.omega.real, m.omega.imag))
