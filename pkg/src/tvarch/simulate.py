"""Path simulation for time-varying ARCH models.

Paths are initialized with a long burn-in of the stationary ARCH recursion at
frozen coefficients a_j(0), then the time-varying recursion

    sigma_t^2 = a_0(t/T) + sum_j a_j(t/T) x_{t-j}^2,   x_t = xi_t sigma_t

runs for t = 1..T, indices t <= 0 being supplied by the burn-in tail.  The
generator is Philox (counter-based, platform-stable); replication r of a
Monte-Carlo run uses :func:`derive_seed` so parallel streams never overlap.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NonPositiveVolatilityError
from .model import NoiseSpec, ReturnSeries, TvArchModel

__all__ = ["SimulationConfig", "derive_seed", "generator", "draw_noise", "simulate_path"]

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *path) -> int:
    """Derive a child seed from a base seed and a path of ints/strings.

    Pure integer arithmetic (splitmix64 chain), so derived streams are
    reproducible across platforms and disjoint for distinct paths.
    """
    h = seed & _MASK64
    for part in path:
        if isinstance(part, str):
            part = zlib.crc32(part.encode())
        h = _splitmix64(h ^ _splitmix64(int(part) & _MASK64))
    return h


def generator(seed: int) -> np.random.Generator:
    """Counter-based Philox generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


@dataclass(frozen=True)
class SimulationConfig:
    T: int
    seed: int
    burn_in: int = 500

    def __post_init__(self):
        if self.T < 1:
            raise InputError("T must be >= 1")
        if self.burn_in < 0:
            raise InputError("burn_in must be >= 0")


def _draws(spec: NoiseSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if spec.law == "gaussian":
        return rng.standard_normal(n)
    # Student-t standardized to unit variance.
    scale = np.sqrt((spec.df - 2.0) / spec.df)
    return rng.standard_t(spec.df, size=n) * scale


def draw_noise(spec: NoiseSpec, n: int, seed: int) -> np.ndarray:
    """n i.i.d. unit-variance draws; identical seeds give identical streams."""
    if n < 0:
        raise InputError("n must be >= 0")
    if n == 0:
        return np.empty(0)
    return _draws(spec, generator(seed), n)


def simulate_path(model: TvArchModel, config: SimulationConfig) -> ReturnSeries:
    """Simulate x_1..x_T from the model under the given config."""
    model.validate()
    p = model.p
    T = config.T
    contraction = model.contraction_constant()
    if contraction > 0.9 and config.burn_in < 50:
        warnings.warn(
            f"burn_in={config.burn_in} is short for contraction constant {contraction:.3f};"
            " initialization bias may be visible",
            stacklevel=2,
        )

    rng = generator(config.seed)
    n_pre = config.burn_in + p
    xi = _draws(model.noise, rng, n_pre + T)

    frozen = np.array([c(0.0) for c in model.coeffs])
    c0 = frozen[1:].sum() if p > 0 else 0.0
    mean_sq0 = frozen[0] / (1.0 - c0) if c0 < 1.0 else frozen[0]

    x = np.empty(n_pre + T)
    lag_sq = np.full(p, mean_sq0) if p > 0 else np.empty(0)

    # Stationary prefix at frozen rescaled time 0.
    for s in range(n_pre):
        sig_sq = frozen[0] + float(frozen[1:] @ lag_sq)
        x[s] = xi[s] * np.sqrt(sig_sq)
        if p > 0:
            lag_sq = np.concatenate(([x[s] ** 2], lag_sq[:-1]))

    u = np.arange(1, T + 1) / T
    coef = model.coefficient_values(u)  # (p+1, T)

    for t in range(1, T + 1):
        idx = n_pre + t - 1
        sig_sq = coef[0, t - 1]
        for j in range(1, p + 1):
            sig_sq += coef[j, t - 1] * x[idx - j] ** 2
        if sig_sq <= 0.0:
            raise NonPositiveVolatilityError(f"sigma_t^2 = {sig_sq:.3g} at t={t}")
        x[idx] = xi[idx] * np.sqrt(sig_sq)

    return ReturnSeries(x[n_pre:].copy())
