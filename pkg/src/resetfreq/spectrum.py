"""Harmonic spectra against the ``sin(n w t)`` basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["HarmonicSpectrum", "odd_orders"]


def odd_orders(n_max: int) -> np.ndarray:
    """Odd harmonic orders ``1, 3, ..., <= n_max``."""
    return np.arange(1, int(n_max) + 1, 2)


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Periodic signal ``sum_n Im(c_n exp(j n omega t))``.

    Equivalently ``sum_n |c_n| sin(n omega t + angle(c_n))``: the stored
    complex number is the phasor of the n-th harmonic in the sine basis.
    """

    omega: float
    orders: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        orders = np.asarray(self.orders, dtype=int).ravel()
        coeffs = np.asarray(self.coeffs, dtype=complex).ravel()
        if orders.shape != coeffs.shape:
            raise ValueError("orders and coeffs must have the same length")
        if np.any(orders < 1):
            raise ValueError("harmonic orders must be positive")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("harmonic coefficients must be finite")
        orders.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def empty(cls, omega: float) -> "HarmonicSpectrum":
        return cls(omega, np.zeros(0, dtype=int), np.zeros(0, dtype=complex))

    @property
    def n_max(self) -> int:
        return int(self.orders.max()) if self.orders.size else 0

    def __len__(self):
        return self.orders.size

    def __getitem__(self, n: int) -> complex:
        idx = np.flatnonzero(self.orders == n)
        return complex(self.coeffs[idx[0]]) if idx.size else 0j

    def as_dict(self) -> dict[int, complex]:
        return {int(n): complex(c) for n, c in zip(self.orders, self.coeffs)}

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.coeffs)

    @property
    def phase(self) -> np.ndarray:
        ang = np.angle(self.coeffs)
        return np.where(ang == -np.pi, np.pi, ang)

    def scaled(self, k: complex) -> "HarmonicSpectrum":
        return HarmonicSpectrum(self.omega, self.orders, self.coeffs * k)

    def __add__(self, other: "HarmonicSpectrum") -> "HarmonicSpectrum":
        if not np.isclose(self.omega, other.omega, rtol=1e-12, atol=0):
            raise ValueError("cannot add spectra with different base frequencies")
        merged: dict[int, complex] = self.as_dict()
        for n, c in other.as_dict().items():
            merged[n] = merged.get(n, 0j) + c
        orders = np.array(sorted(merged), dtype=int)
        return HarmonicSpectrum(self.omega, orders, [merged[n] for n in orders])

    def truncated(self, n_max: int) -> "HarmonicSpectrum":
        keep = self.orders <= n_max
        return HarmonicSpectrum(self.omega, self.orders[keep], self.coeffs[keep])

    def reconstruct(self, t) -> np.ndarray:
        return reconstruct(self, t)


def reconstruct(spec: HarmonicSpectrum, t, chunk: int = 64) -> np.ndarray:
    """Sample the real signal described by ``spec`` at times ``t`` (s)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    if len(spec) == 0:
        return out
    period = 2 * np.pi / spec.omega
    tf = np.mod(t.ravel(), period)
    acc = np.zeros(tf.shape)
    for i in range(0, len(spec), chunk):
        n = spec.orders[i:i + chunk, None]
        c = spec.coeffs[i:i + chunk, None]
        # Im(c e^{j n w t}) = Re(c) sin + Im(c) cos
        phase = spec.omega * n * tf[None, :]
        acc += np.sum(c.real * np.sin(phase) + c.imag * np.cos(phase), axis=0)
    return acc.reshape(t.shape)
