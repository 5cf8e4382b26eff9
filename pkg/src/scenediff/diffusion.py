"""Noise schedules, forward noising, and conditional ancestral sampling.

The sampler is parameterized by an external denoiser callable
``denoiser(x_level, level, conditions) -> x0_hat`` that predicts the clean
sample; each backward step re-noises the prediction through the Gaussian
posterior q(x_{t} | x_{t+1}, x0_hat).  A masked variant keeps chosen points
pinned to a known cloud (per-step overwrite), which is how shape edits keep
part of an object fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BETA_MAX = 0.999


class DiffusionError(ValueError):
    pass


@dataclass
class NoiseSchedule:
    kind: str
    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        if self.T < 2:
            raise DiffusionError("schedule needs T >= 2")
        if not ((self.beta > 0.0).all() and (self.beta < 1.0).all()):
            raise DiffusionError("beta values must lie in (0, 1)")
        if not (np.diff(self.alpha_bar) < 0.0).all():
            raise DiffusionError("alpha_bar must be strictly decreasing")
        if self.alpha_bar[-1] >= 0.01:
            raise DiffusionError(
                f"terminal alpha_bar {self.alpha_bar[-1]:.4f} too large; "
                "the forward process must end near pure noise")


def make_schedule(kind: str, T: int) -> NoiseSchedule:
    """`linear` ramps beta 1e-4 -> 0.02 (the T=1000 reference ramp, rescaled by
    1000/T so shorter schedules still finish near pure noise); `cosine` is the
    squared-cosine alpha_bar schedule."""
    if T < 2:
        raise DiffusionError("T must be >= 2")
    if kind == "linear":
        beta = np.linspace(1e-4, 0.02, T) * (1000.0 / T)
        beta = np.clip(beta, 0.0, BETA_MAX)
    elif kind == "cosine":
        o = 0.008
        u = np.arange(T + 1) / T
        f = np.cos((u + o) / (1.0 + o) * np.pi / 2.0) ** 2
        abar_cont = f / f[0]
        beta = 1.0 - abar_cont[1:] / abar_cont[:-1]
        beta = np.clip(beta, 1e-8, BETA_MAX)
    else:
        raise DiffusionError(f"unknown schedule kind {kind!r}")
    alpha = 1.0 - beta
    return NoiseSchedule(kind, T, beta, alpha, np.cumprod(alpha))


def q_sample(x0, t: int, noise, schedule: NoiseSchedule) -> np.ndarray:
    """Closed-form forward noising: sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    if not 0 <= t < schedule.T:
        raise DiffusionError(f"timestep {t} out of range [0, {schedule.T})")
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x0.shape:
        raise DiffusionError(f"noise shape {noise.shape} != x0 shape {x0.shape}")
    ab = schedule.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise


def _rng(seed, tag: int) -> np.random.Generator:
    """Generator from an int or tuple seed plus a fixed stream tag."""
    parts = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    return np.random.default_rng([int(p) for p in parts] + [tag])


def _posterior_coeffs(schedule: NoiseSchedule, s: int):
    """Coefficients of q(x_{s-1} | x_s, x0): mean = c0*x0 + cx*x_s, var."""
    ab_s = schedule.alpha_bar[s]
    ab_prev = schedule.alpha_bar[s - 1]
    beta_s = schedule.beta[s]
    c0 = np.sqrt(ab_prev) * beta_s / (1.0 - ab_s)
    cx = np.sqrt(schedule.alpha[s]) * (1.0 - ab_prev) / (1.0 - ab_s)
    var = beta_s * (1.0 - ab_prev) / (1.0 - ab_s)
    return c0, cx, var


def _check_denoiser_output(x0_hat, n_points: int, level: int) -> np.ndarray:
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    if x0_hat.shape != (n_points, 3):
        raise DiffusionError(
            f"denoiser returned shape {x0_hat.shape}, expected ({n_points}, 3)")
    if not np.isfinite(x0_hat).all():
        raise DiffusionError(f"denoiser returned non-finite values at level {level}")
    return x0_hat


def p_sample_loop(denoiser, conditions, schedule: NoiseSchedule, n_points: int,
                  seed) -> np.ndarray:
    """Ancestral sampling from pure noise; returns the final x0 prediction.

    Deterministic for a fixed seed.  The last step returns the denoiser's
    clean prediction directly (posterior mean, no added noise).
    """
    rng = _rng(seed, 0)
    x = rng.standard_normal((n_points, 3))
    for s in range(schedule.T - 1, 0, -1):
        x0_hat = _check_denoiser_output(denoiser(x, s, conditions), n_points, s)
        c0, cx, var = _posterior_coeffs(schedule, s)
        x = c0 * x0_hat + cx * x + np.sqrt(var) * rng.standard_normal((n_points, 3))
    return _check_denoiser_output(denoiser(x, 0, conditions), n_points, 0)


def inpaint_loop(denoiser, conditions, schedule: NoiseSchedule, mask, known,
                 seed) -> np.ndarray:
    """p_sample_loop with masked points re-pinned to `known` after every step.

    `mask` is a boolean vector (True = fixed); the result has masked rows
    exactly equal to `known`.  Pin noise comes from a separate stream, so an
    all-False mask reproduces p_sample_loop bit for bit at the same seed.
    """
    known = np.asarray(known, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if known.ndim != 2 or known.shape[1] != 3:
        raise DiffusionError("known cloud must be (N, 3)")
    if mask.shape != (known.shape[0],):
        raise DiffusionError("mask length must match the known cloud")
    if mask.all():
        raise DiffusionError("mask fixes every point; nothing to generate")
    n_points = known.shape[0]
    rng = _rng(seed, 0)
    rng_pin = _rng(seed, 1)
    x = rng.standard_normal((n_points, 3))
    x[mask] = q_sample(known, schedule.T - 1, rng_pin.standard_normal(known.shape),
                       schedule)[mask]
    for s in range(schedule.T - 1, 0, -1):
        x0_hat = _check_denoiser_output(denoiser(x, s, conditions), n_points, s)
        c0, cx, var = _posterior_coeffs(schedule, s)
        x = c0 * x0_hat + cx * x + np.sqrt(var) * rng.standard_normal((n_points, 3))
        x[mask] = q_sample(known, s - 1, rng_pin.standard_normal(known.shape),
                           schedule)[mask]
    out = _check_denoiser_output(denoiser(x, 0, conditions), n_points, 0).copy()
    out[mask] = known[mask]
    return out
