"""Pure numerical core of the sampler.

Noise schedules, closed-form forward noising, deterministic backward
stepping, clean-latent prediction, flat-background latents, starting-latent
composition, and per-step background blending. Everything here is a
stateless function over immutable arrays; randomness enters only through
caller-supplied noise samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidRange, InvalidTimesteps, ShapeMismatch


@dataclass(frozen=True)
class Schedule:
    """Noise-schedule tables: per-step beta and the running product alpha_bar.

    alpha_bar[t-1] is the cumulative product of (1 - beta) through step t;
    timestep 0 (a fully clean latent) has alpha_bar defined as 1.
    """

    beta: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        alpha_bar = np.asarray(self.alpha_bar, dtype=np.float64)
        if beta.ndim != 1 or beta.size < 1 or beta.shape != alpha_bar.shape:
            raise InvalidRange("beta and alpha_bar must be equal-length 1-D tables")
        if not ((beta > 0.0) & (beta < 1.0)).all():
            raise InvalidRange("every beta must lie strictly in (0, 1)")
        if alpha_bar.size > 1 and not (np.diff(alpha_bar) < 0.0).all():
            raise InvalidRange("alpha_bar must be strictly decreasing")
        beta.flags.writeable = False
        alpha_bar.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    @property
    def T(self) -> int:
        return int(self.beta.size)

    def alpha_bar_at(self, t: int) -> float:
        """alpha_bar at timestep t, with the t=0 boundary closed as exactly 1."""
        if t == 0:
            return 1.0
        if not 1 <= t <= self.T:
            raise InvalidTimesteps(f"timestep {t} outside [0, {self.T}]")
        return float(self.alpha_bar[t - 1])


def make_schedule(T: int, beta_start: float, beta_end: float) -> Schedule:
    """Linear beta interpolation over [beta_start, beta_end] with T steps."""
    if T < 1:
        raise InvalidRange(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise InvalidRange(f"need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]")
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bar = np.cumprod(1.0 - beta)
    return Schedule(beta=beta, alpha_bar=alpha_bar)


DEFAULT_SCHEDULE_ARGS = dict(T=1000, beta_start=0.00085, beta_end=0.012)


def _check_shapes(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what}: {a.shape} vs {b.shape}")


def forward_noise(x0: np.ndarray, t: int, eps: np.ndarray, s: Schedule) -> np.ndarray:
    """Closed-form noising: sqrt(a_t) * x0 + sqrt(1 - a_t) * eps, elementwise."""
    x0 = np.asarray(x0)
    eps = np.asarray(eps)
    _check_shapes(x0, eps, "x0 vs eps")
    a = s.alpha_bar_at(t)
    return np.sqrt(a) * x0 + np.sqrt(1.0 - a) * eps


def predict_x0(x_t: np.ndarray, eps_pred: np.ndarray, t: int, s: Schedule) -> np.ndarray:
    """Clean-latent estimate: (x_t - sqrt(1 - a_t) * eps) / sqrt(a_t)."""
    x_t = np.asarray(x_t)
    eps_pred = np.asarray(eps_pred)
    _check_shapes(x_t, eps_pred, "x_t vs eps_pred")
    a = s.alpha_bar_at(t)
    return (x_t - np.sqrt(1.0 - a) * eps_pred) / np.sqrt(a)


def ddim_step(x_t: np.ndarray, eps_pred: np.ndarray, t: int, t_prev: int, s: Schedule) -> np.ndarray:
    """Deterministic backward step from t to t_prev.

    sqrt(a_prev) * predict_x0(x_t, eps, t) + sqrt(1 - a_prev) * eps.
    Stepping to t_prev = 0 returns the clean prediction exactly.
    """
    if not (0 <= t_prev < t <= s.T):
        raise InvalidTimesteps(f"need 0 <= t_prev < t <= T, got t={t} t_prev={t_prev} T={s.T}")
    a_prev = s.alpha_bar_at(t_prev)
    x0 = predict_x0(x_t, eps_pred, t, s)
    return np.sqrt(a_prev) * x0 + np.sqrt(1.0 - a_prev) * np.asarray(eps_pred)


def flat_latent(flat_code: np.ndarray, t: int, eps: np.ndarray, s: Schedule) -> np.ndarray:
    """Noised latent of the flat background at timestep t.

    flat_code is the latent encoding of the constant flat-color image,
    computed once per generation. The caller draws eps once and reuses it
    for every timestep, so the background follows a single consistent
    forward trajectory.
    """
    return forward_noise(flat_code, t, eps, s)


def _mask_for_latent(latent: np.ndarray, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != latent.shape[-2:]:
        raise ShapeMismatch(f"latent-resolution mask {mask.shape} vs latent spatial dims {latent.shape[-2:]}")
    return mask.astype(latent.dtype)


def compose_starting_latent(x_flat: np.ndarray, mask: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Starting latent: flat-background latent outside the mask, pure noise inside."""
    x_flat = np.asarray(x_flat)
    eps = np.asarray(eps)
    _check_shapes(x_flat, eps, "x_flat vs eps")
    m = _mask_for_latent(x_flat, mask)
    return (1.0 - m) * x_flat + m * eps


def blend_background(x_t: np.ndarray, x_flat_t: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Keep x_t inside the mask, flat-background trajectory outside."""
    x_t = np.asarray(x_t)
    x_flat_t = np.asarray(x_flat_t)
    _check_shapes(x_t, x_flat_t, "x_t vs x_flat_t")
    m = _mask_for_latent(x_t, mask)
    return m * x_t + (1.0 - m) * x_flat_t


@dataclass(frozen=True)
class TimestepPlan:
    """Strictly decreasing sampling timesteps, starting exactly at t_start."""

    steps: tuple[int, ...]
    t_start: int

    def __post_init__(self):
        if not self.steps:
            raise InvalidRange("plan must contain at least one step")
        if self.steps[0] != self.t_start:
            raise InvalidRange("first step must equal t_start")
        if self.steps[-1] < 1:
            raise InvalidRange("last step must be >= 1")
        if any(nxt >= cur for cur, nxt in zip(self.steps, self.steps[1:])):
            raise InvalidRange("steps must be strictly decreasing")

    def transitions(self) -> list[tuple[int, int]]:
        """Consecutive (t, t_prev) pairs, closing with (last step, 0)."""
        nxt = list(self.steps[1:]) + [0]
        return list(zip(self.steps, nxt))


def plan_timesteps(num_steps: int, T: int, t_start: int) -> TimestepPlan:
    """Uniform timestep grid truncated at t_start.

    A nominal full-range grid of round(num_steps * T / t_start) uniformly
    spaced steps is laid over [1, T]; steps above t_start are dropped, so
    lowering t_start skips the early (high-noise) part of the grid while
    keeping its spacing. If t_start falls between grid points it is added
    as the first step so the plan starts exactly there.
    """
    if num_steps < 1:
        raise InvalidRange(f"num_steps must be >= 1, got {num_steps}")
    if not 1 <= t_start <= T:
        raise InvalidRange(f"t_start must be in [1, T], got {t_start} with T={T}")
    nominal = int(round(num_steps * T / t_start))
    if nominal < 1 or nominal > T:
        raise InvalidRange(f"nominal step count {nominal} outside [1, T]")
    stride = T // nominal
    grid = np.arange(stride, T + 1, stride, dtype=int)
    kept = [int(v) for v in grid[grid <= t_start]]
    if not kept or kept[-1] != t_start:
        kept.append(t_start)
    return TimestepPlan(steps=tuple(reversed(kept)), t_start=t_start)
