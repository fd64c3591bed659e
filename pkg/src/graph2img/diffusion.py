"""Deterministic latent diffusion editing: schedule, DDIM, inversion, CFG.

Latents are flat float64 vectors.  The variance-preserving forward
process is

    x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps

over a linear beta schedule; sampling visits an evenly spaced subset of
the training indices.  The deterministic (eta = 0) DDIM update
reconstructs x0_hat from a noise prediction and re-projects it to the
target noise level; "zero" as a target means the fully clean level
(abar = 1).

Inversion anchors the clean latent at the first sampling index and
climbs the remaining indices in reverse.  Each reversed step solves the
implicit consistency equation eps = denoiser(x_t, t, c) by fixed-point
iteration, then tightens the last three iterates with a guarded Aitken
delta-squared extrapolation; for denoisers affine in x (per coordinate)
the extrapolated solve is exact, which is what makes the
invert-then-denoise round trip reproduce x0 to near machine precision.

Editing follows the inversion with a joint three-branch denoising loop:
unconditioned, source-conditioned, and target-conditioned noise
predictions are blended by classifier-free guidance at every step, and
the final step targets the clean level.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    NumericDivergenceError,
    SingularityError,
    ValidationError,
)
from .text_encoding import TextEmbedding

DEFAULT_TRAINING_STEPS = 1000
DEFAULT_SAMPLE_STEPS = 50
DEFAULT_SKIP = 25
DEFAULT_FIXED_POINT_ITERS = 5
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02
DEFAULT_LATENT_SHAPE = (16, 16)

ZERO_LEVEL = "zero"


def as_latent(values) -> np.ndarray:
    """Coerce to a finite 1-D float64 vector."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValidationError("latent must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("latent entries must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class DiffusionSchedule:
    """Per-step betas, cumulative alpha products, and the sampling grid.

    Schedule indices are 1-based: alpha_bar(t) = prod_{i<=t}(1 - beta_i),
    with alpha_bar(0) == alpha_bar("zero") == 1 as the clean level.
    """

    betas: np.ndarray
    alpha_bars: np.ndarray
    sample_indices: tuple[int, ...]

    def __post_init__(self):
        betas = np.array(self.betas, dtype=np.float64)
        abars = np.array(self.alpha_bars, dtype=np.float64)
        if betas.ndim != 1 or abars.shape != betas.shape or betas.size < 1:
            raise ValidationError("betas and alpha_bars must be equal-length 1-D arrays")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ValidationError("betas must lie strictly inside (0, 1)")
        if not np.allclose(abars, np.cumprod(1.0 - betas), rtol=1e-12, atol=0):
            raise ValidationError("alpha_bars must be the cumulative products of 1 - beta")
        if np.any(np.diff(abars) >= 0):
            raise ValidationError("alpha_bars must be strictly decreasing")
        idx = tuple(int(i) for i in self.sample_indices)
        if not idx or any(i < 1 or i > betas.size for i in idx):
            raise ValidationError("sample_indices must lie within [1, T_train]")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValidationError("sample_indices must be strictly increasing")
        betas.setflags(write=False)
        abars.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bars", abars)
        object.__setattr__(self, "sample_indices", idx)

    def __eq__(self, other):
        return (
            isinstance(other, DiffusionSchedule)
            and self.sample_indices == other.sample_indices
            and np.array_equal(self.betas, other.betas)
            and np.array_equal(self.alpha_bars, other.alpha_bars)
        )

    @property
    def training_steps(self) -> int:
        return int(self.betas.size)

    @property
    def sample_steps(self) -> int:
        return len(self.sample_indices)

    def alpha_bar(self, t) -> float:
        """alpha_bar at schedule index t; t == 0 or "zero" is the clean level."""
        if t == ZERO_LEVEL or t == 0:
            return 1.0
        t = int(t)
        if not 1 <= t <= self.training_steps:
            raise ValidationError(f"schedule index {t} outside [1, {self.training_steps}]")
        return float(self.alpha_bars[t - 1])


def build_schedule(
    training_steps: int = DEFAULT_TRAINING_STEPS,
    sample_steps: int = DEFAULT_SAMPLE_STEPS,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> DiffusionSchedule:
    """Linear beta schedule with evenly spaced sampling indices ending at T_train."""
    if training_steps < 1:
        raise ValidationError("training_steps must be >= 1")
    if not 1 <= sample_steps <= training_steps:
        raise ValidationError(f"sample_steps must lie in [1, {training_steps}], got {sample_steps}")
    betas = np.linspace(beta_start, beta_end, training_steps)
    indices = tuple((k + 1) * training_steps // sample_steps for k in range(sample_steps))
    return DiffusionSchedule(betas=betas, alpha_bars=np.cumprod(1.0 - betas), sample_indices=indices)


@dataclass(frozen=True)
class EditConfig:
    """Guidance scale, branch weights, and loop controls for editing."""

    guidance_scale: float
    w_src: float
    w_tgt: float
    steps: int = DEFAULT_SAMPLE_STEPS
    skip: int = DEFAULT_SKIP
    fixed_point_iters: int = DEFAULT_FIXED_POINT_ITERS

    def __post_init__(self):
        if not (0 <= self.w_src <= 1 and 0 <= self.w_tgt <= 1):
            raise ValidationError("branch weights must lie in [0, 1]")
        if abs(self.w_src + self.w_tgt - 1.0) > 1e-12:
            raise ValidationError(f"branch weights must sum to 1, got {self.w_src + self.w_tgt!r}")
        if self.guidance_scale < 0:
            raise ValidationError("guidance scale must be non-negative")
        if self.guidance_scale <= 1:
            warnings.warn(
                f"guidance scale {self.guidance_scale} <= 1 is only meant for identity/ablation runs",
                UserWarning,
                stacklevel=2,
            )
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if not 0 <= self.skip < self.steps:
            raise ValidationError(f"skip must lie in [0, steps), got skip={self.skip}, steps={self.steps}")
        if self.fixed_point_iters < 1:
            raise ValidationError("fixed_point_iters must be >= 1")


@dataclass(frozen=True)
class GaussianAnalyticDenoiser:
    """Closed-form optimal noise predictor for x0 ~ Normal(mu_c, sigma^2 I).

    The conditioning mean mu_c tiles the embedding cyclically to the
    latent dimension, so null conditioning maps to mu = 0 exactly.
    """

    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0 or not np.isfinite(self.sigma):
            raise ValidationError("sigma must be a non-negative real")

    def mean_for(self, c: TextEmbedding, dim: int) -> np.ndarray:
        return np.resize(c.values, dim)

    def __call__(self, x_t: np.ndarray, t, c: TextEmbedding, schedule: DiffusionSchedule) -> np.ndarray:
        return analytic_eps(x_t, t, self, c, schedule)


@dataclass(frozen=True, eq=False)
class LinearDenoiserParams:
    """Trainable affine noise predictor: A x_t + B c + b [sqrt(abar), sqrt(1-abar)]."""

    A: np.ndarray
    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.A, dtype=np.float64)
        bb = np.array(self.B, dtype=np.float64)
        tb = np.array(self.b, dtype=np.float64)
        d = a.shape[0]
        if a.shape != (d, d) or bb.ndim != 2 or bb.shape[0] != d or tb.shape != (d, 2):
            raise ValidationError("inconsistent denoiser parameter shapes")
        for name, arr in (("A", a), ("B", bb), ("b", tb)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", bb)
        object.__setattr__(self, "b", tb)

    def __eq__(self, other):
        return isinstance(other, LinearDenoiserParams) and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("A", "B", "b")
        )

    def __call__(self, x_t: np.ndarray, t, c: TextEmbedding, schedule: DiffusionSchedule) -> np.ndarray:
        abar = schedule.alpha_bar(t)
        feats = np.array([np.sqrt(abar), np.sqrt(1.0 - abar)])
        return self.A @ x_t + self.B @ c.values + self.b @ feats


@dataclass(frozen=True)
class LinearDenoiserGrads:
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray


# ---------------------------------------------------------------------------
# elementary operations


def add_noise(x0, eps, t, schedule: DiffusionSchedule) -> np.ndarray:
    """Forward-noise x0 to level t: sqrt(abar)*x0 + sqrt(1-abar)*eps."""
    x0 = as_latent(x0)
    eps = as_latent(eps)
    if x0.shape != eps.shape:
        raise ValidationError(f"dimension mismatch: {x0.shape} vs {eps.shape}")
    abar = schedule.alpha_bar(t)
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps


def analytic_eps(x_t, t, den: GaussianAnalyticDenoiser, c: TextEmbedding, schedule: DiffusionSchedule) -> np.ndarray:
    """Posterior-mean noise prediction for the gaussian analytic denoiser.

    eps_hat = sqrt(1-abar) * (x_t - sqrt(abar) * mu_c) / (abar*sigma^2 + 1 - abar);
    sigma = 0 reduces to (x_t - sqrt(abar) * mu_c) / sqrt(1-abar).
    """
    x_t = as_latent(x_t)
    abar = schedule.alpha_bar(t)
    denom = abar * den.sigma**2 + 1.0 - abar
    if denom == 0.0:
        raise SingularityError("noise scale is zero: abar = 1 with sigma = 0")
    mu = den.mean_for(c, x_t.size)
    return np.sqrt(1.0 - abar) * (x_t - np.sqrt(abar) * mu) / denom


def cfg_blend(eps_null, eps_src, eps_tgt, cfg: EditConfig) -> np.ndarray:
    """Classifier-free guidance over the weighted source/target blend.

    Returns eps_null + s * (w_src*eps_src + w_tgt*eps_tgt - eps_null).
    """
    eps_null = as_latent(eps_null)
    eps_src = as_latent(eps_src)
    eps_tgt = as_latent(eps_tgt)
    if not (eps_null.shape == eps_src.shape == eps_tgt.shape):
        raise ValidationError("noise predictions must share one dimension")
    text = cfg.w_src * eps_src + cfg.w_tgt * eps_tgt
    return eps_null + cfg.guidance_scale * (text - eps_null)


def ddim_step(x_t, eps, from_t, to_t, schedule: DiffusionSchedule) -> np.ndarray:
    """Deterministic DDIM update from a noisier index to a cleaner one.

    x0_hat = (x_t - sqrt(1-abar_from)*eps) / sqrt(abar_from);
    result = sqrt(abar_to)*x0_hat + sqrt(1-abar_to)*eps.  to_t may be
    "zero" (abar = 1), which returns x0_hat exactly.  from_t == to_t is
    the identity and is permitted.
    """
    x_t = as_latent(x_t)
    eps = as_latent(eps)
    if x_t.shape != eps.shape:
        raise ValidationError(f"dimension mismatch: {x_t.shape} vs {eps.shape}")
    a_from = schedule.alpha_bar(from_t)
    a_to = schedule.alpha_bar(to_t)
    if a_to < a_from:
        raise ValidationError(f"ddim_step must move toward cleaner levels: from_t={from_t}, to_t={to_t}")
    x0_hat = (x_t - np.sqrt(1.0 - a_from) * eps) / np.sqrt(a_from)
    return np.sqrt(a_to) * x0_hat + np.sqrt(1.0 - a_to) * eps


# ---------------------------------------------------------------------------
# inversion and editing


def _aitken(iterates: list[np.ndarray]) -> np.ndarray:
    """Guarded per-coordinate Aitken delta-squared extrapolation.

    Exact for fixed-point maps affine in each coordinate; falls back to
    the plain last iterate where the denominator underflows (already
    converged or no geometric structure).
    """
    if len(iterates) < 3:
        return iterates[-1]
    e0, e1, e2 = iterates[-3], iterates[-2], iterates[-1]
    d0 = e1 - e0
    d1 = e2 - e1
    dd = d1 - d0
    safe = np.abs(dd) > 1e-12 * np.maximum(np.abs(e2), 1.0)
    return np.where(safe, e2 - d1 * d1 / np.where(safe, dd, 1.0), e2)


def _reversed_step(x_prev, t_prev, t_new, c, schedule, denoiser, fp_iters: int) -> np.ndarray:
    """Solve the implicit reversed DDIM update from level t_prev to noisier t_new."""
    a_prev = schedule.alpha_bar(t_prev)
    a_new = schedule.alpha_bar(t_new)

    def project(eps: np.ndarray) -> np.ndarray:
        x0_hat = (x_prev - np.sqrt(1.0 - a_prev) * eps) / np.sqrt(a_prev)
        return np.sqrt(a_new) * x0_hat + np.sqrt(1.0 - a_new) * eps

    iterates = [denoiser(x_prev, t_new, c, schedule)]
    for _ in range(fp_iters):
        iterates.append(denoiser(project(iterates[-1]), t_new, c, schedule))
    return project(_aitken(iterates))


def ddim_invert(
    x0,
    c: TextEmbedding,
    schedule: DiffusionSchedule,
    denoiser,
    upto: int,
    fp_iters: int = DEFAULT_FIXED_POINT_ITERS,
) -> list[np.ndarray]:
    """Invert a clean latent up through the sampling grid, anchored by c.

    The clean latent is anchored at sampling position 1 (the first
    sample index); `upto` names the highest sampling position to reach,
    so positions 0 and 1 both return just [x0].  Every denoiser call is
    conditioned on c at guidance scale 1.  Returns one latent per
    visited position, starting with x0.
    """
    x0 = as_latent(x0)
    total = schedule.sample_steps
    if not 0 <= upto <= total:
        raise ValidationError(f"upto must lie in [0, {total}], got {upto}")
    if fp_iters < 1:
        raise ValidationError("fp_iters must be >= 1")
    trajectory = [x0]
    for pos in range(2, max(upto, 1) + 1):
        t_prev = schedule.sample_indices[pos - 2]
        t_new = schedule.sample_indices[pos - 1]
        x = _reversed_step(trajectory[-1], t_prev, t_new, c, schedule, denoiser, fp_iters)
        if not np.all(np.isfinite(x)):
            raise NumericDivergenceError(
                f"inversion diverged at position {pos} (schedule index {t_new})"
            )
        trajectory.append(x)
    return trajectory


def ddim_denoise(
    x,
    c: TextEmbedding,
    schedule: DiffusionSchedule,
    denoiser,
    from_position: int,
    to_position: int = 1,
) -> np.ndarray:
    """Single-conditioning DDIM descent between sampling positions.

    Mirrors ddim_invert: steps from `from_position` down to
    `to_position` (both 1-based on the sampling grid) without the final
    jump to the clean level, so with matching conditioning it undoes an
    inversion trajectory.
    """
    x = as_latent(x)
    total = schedule.sample_steps
    if not 1 <= to_position <= from_position <= total:
        raise ValidationError(f"positions must satisfy 1 <= to <= from <= {total}")
    for pos in range(from_position, to_position, -1):
        t_from = schedule.sample_indices[pos - 1]
        t_to = schedule.sample_indices[pos - 2]
        x = ddim_step(x, denoiser(x, t_from, c, schedule), t_from, t_to, schedule)
    return x


def edit(
    x0,
    c_src: TextEmbedding,
    c_tgt: TextEmbedding,
    c_null: TextEmbedding,
    cfg: EditConfig,
    schedule: DiffusionSchedule,
    denoiser,
) -> np.ndarray:
    """Joint source/target-conditioned edit of a clean latent.

    Inverts x0 (anchored by c_src) up to sampling position
    steps - skip, then denoises back down with the three-branch
    classifier-free blend at every step; the final step targets the
    clean level.  Deterministic: repeated calls are bitwise identical.
    """
    x0 = as_latent(x0)
    if not (c_src.dimension == c_tgt.dimension == c_null.dimension):
        raise ValidationError("conditioning embeddings must share one dimension")
    if cfg.steps != schedule.sample_steps:
        raise ValidationError(
            f"config steps {cfg.steps} does not match schedule sample steps {schedule.sample_steps}"
        )
    top = cfg.steps - cfg.skip
    trajectory = ddim_invert(x0, c_src, schedule, denoiser, upto=top, fp_iters=cfg.fixed_point_iters)
    x = trajectory[-1]
    for pos in range(top, 0, -1):
        t_from = schedule.sample_indices[pos - 1]
        t_to = ZERO_LEVEL if pos == 1 else schedule.sample_indices[pos - 2]
        eps_null = denoiser(x, t_from, c_null, schedule)
        eps_src = denoiser(x, t_from, c_src, schedule)
        eps_tgt = denoiser(x, t_from, c_tgt, schedule)
        x = ddim_step(x, cfg_blend(eps_null, eps_src, eps_tgt, cfg), t_from, t_to, schedule)
        if not np.all(np.isfinite(x)):
            raise NumericDivergenceError(f"edit diverged at position {pos} (schedule index {t_from})")
    return x


# ---------------------------------------------------------------------------
# noise-prediction training objective


def noise_pred_loss(
    params: LinearDenoiserParams,
    batch: list[tuple[np.ndarray, TextEmbedding, int, np.ndarray]],
    schedule: DiffusionSchedule,
) -> tuple[float, LinearDenoiserGrads]:
    """Mean squared noise-prediction error with analytic gradients.

    Each batch element is (x0, c, t, eps); the predictor sees
    x_t = add_noise(x0, eps, t) and regresses eps.  The loss is the
    batch mean of the per-example squared-error sum.
    """
    if not batch:
        raise ValidationError("batch must be non-empty")
    d_a = np.zeros_like(params.A)
    d_b = np.zeros_like(params.B)
    d_t = np.zeros_like(params.b)
    total = 0.0
    for x0, c, t, eps in batch:
        x_t = add_noise(x0, eps, t, schedule)
        abar = schedule.alpha_bar(t)
        feats = np.array([np.sqrt(abar), np.sqrt(1.0 - abar)])
        residual = params.A @ x_t + params.B @ c.values + params.b @ feats - as_latent(eps)
        total += float(residual @ residual)
        d_a += 2.0 * np.outer(residual, x_t)
        d_b += 2.0 * np.outer(residual, c.values)
        d_t += 2.0 * np.outer(residual, feats)
    n = len(batch)
    grads = LinearDenoiserGrads(A=d_a / n, B=d_b / n, b=d_t / n)
    return total / n, grads


# ---------------------------------------------------------------------------
# latent serialization (JSON)


def latent_to_json(values, shape: tuple[int, int] | None = None) -> str:
    """Serialize a latent as a JSON decimal array (exact round trip)."""
    doc: dict = {"values": [float(v) for v in as_latent(values)]}
    if shape is not None:
        doc["shape"] = [int(shape[0]), int(shape[1])]
    return json.dumps(doc)


def latent_from_json(text: str) -> tuple[np.ndarray, tuple[int, int] | None]:
    doc = json.loads(text)
    if not isinstance(doc, dict) or "values" not in doc:
        raise ValidationError("latent JSON needs a 'values' array")
    shape = None
    if doc.get("shape") is not None:
        rows, cols = doc["shape"]
        shape = (int(rows), int(cols))
    return as_latent(doc["values"]), shape
