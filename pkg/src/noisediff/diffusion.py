"""Noise schedules, forward diffusion, and the deterministic DDIM pipeline.

Timesteps are 1-based: ``alpha_bar(t)`` is defined for t in [0, T] with
``alpha_bar(0) == 1``, and a reverse step maps z_t to z_{t-1} for t >= 1.
All array operations broadcast over leading axes, so a stack of latents
of shape (n, d) moves through the pipeline as one array.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .errors import DimensionError, ScheduleError, UnknownConditionError

__all__ = [
    "NoiseSchedule",
    "build_schedule",
    "forward_diffuse",
    "DenoiserModel",
    "ConstantDenoiser",
    "MixtureComponent",
    "AnalyticMixtureDenoiser",
    "analytic_mixture_eps",
    "GuidanceConfig",
    "cfg_predict",
    "ddim_step",
    "Decoder",
    "IdentityDecoder",
    "LinearDecoder",
    "Pipeline",
    "denoise_pipeline",
]

DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule: betas[i] is beta_{i+1}; alpha_bars has length T+1."""

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def __post_init__(self):
        for name in ("betas", "alphas", "alpha_bars"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        T = self.betas.size
        if self.alphas.size != T or self.alpha_bars.size != T + 1:
            raise ScheduleError("schedule arrays have inconsistent lengths")
        if T and not np.all((self.betas > 0.0) & (self.betas < 1.0)):
            raise ScheduleError("betas must lie strictly inside (0, 1)")
        if self.alpha_bars[0] != 1.0:
            raise ScheduleError("alpha_bar at t=0 must be exactly 1")
        if T and not np.all(np.diff(self.alpha_bars) < 0.0):
            raise ScheduleError("alpha_bar must be strictly decreasing")
        expected = self.alpha_bars[:-1] * self.alphas
        if T and not np.allclose(self.alpha_bars[1:], expected, rtol=1e-12, atol=0.0):
            raise ScheduleError("alpha_bars is not the running product of alphas")

    @property
    def T(self) -> int:
        return self.betas.size

    def alpha_bar(self, t: int) -> float:
        if not 0 <= t <= self.T:
            raise ScheduleError(f"timestep {t} outside [0, {self.T}]")
        return float(self.alpha_bars[t])

    @classmethod
    def degenerate(cls) -> "NoiseSchedule":
        """T = 0 schedule: the pipeline reduces to the decoder alone."""
        return cls(np.empty(0), np.empty(0), np.ones(1))


def build_schedule(
    T: int,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Linear beta ramp over T steps with cumulative-product alpha_bars."""
    if T < 1:
        raise ScheduleError(f"schedule needs T >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ScheduleError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    betas = np.linspace(beta_start, beta_end, T)
    alphas = 1.0 - betas
    alpha_bars = np.concatenate([[1.0], np.cumprod(alphas)])
    return NoiseSchedule(betas, alphas, alpha_bars)


def forward_diffuse(z0, t: int, noise, sched: NoiseSchedule) -> np.ndarray:
    """Noising step: sqrt(ab_t) * z0 + sqrt(1 - ab_t) * noise."""
    z0 = np.asarray(z0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if z0.shape != noise.shape:
        raise DimensionError(f"shape mismatch: {z0.shape} vs {noise.shape}")
    ab = sched.alpha_bar(t)
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * noise


class DenoiserModel:
    """Noise predictor interface: eps(z, t, condition) with matching dims."""

    dim: int

    def predict(self, z, t: int, condition=None) -> np.ndarray:
        raise NotImplementedError

    def predict_jacobian(self, z, t: int, condition=None) -> np.ndarray:
        """d eps / d z as a (dim, dim) matrix; optional, used by the exact
        gradient chain. Subclasses without a closed form leave this
        unimplemented."""
        raise NotImplementedError


class ConstantDenoiser(DenoiserModel):
    """Predicts the same vector regardless of input; the regime in which
    the one-pass gradient shortcut is exact."""

    def __init__(self, value, dim: int | None = None):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim == 0:
            if dim is None:
                raise DimensionError("scalar constant needs an explicit dim")
            value = np.full(dim, float(value))
        if value.ndim != 1:
            raise DimensionError("constant prediction must be a vector")
        self.value = value
        self.dim = value.size

    def predict(self, z, t: int, condition=None) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.dim:
            raise DimensionError(f"latent dim {z.shape[-1]} != model dim {self.dim}")
        return np.broadcast_to(self.value, z.shape).copy()

    def predict_jacobian(self, z, t: int, condition=None) -> np.ndarray:
        return np.zeros((self.dim, self.dim))


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: np.ndarray
    var: float  # isotropic variance s^2

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        if self.weight <= 0.0:
            raise ValueError(f"component weight must be positive, got {self.weight}")
        if self.var <= 0.0:
            raise ValueError(f"component variance must be positive, got {self.var}")


class AnalyticMixtureDenoiser(DenoiserModel):
    """Exact noise predictor for isotropic Gaussian-mixture data.

    The marginal at step t is sum_k w_k N(sqrt(ab_t) mu_k,
    (ab_t s_k^2 + 1 - ab_t) I), and the optimal prediction is
    -sqrt(1 - ab_t) times its log-density gradient. A condition id
    restricts the mixture to a subset of components (weights
    renormalized); the null condition (None) uses all of them.
    """

    def __init__(self, components, schedule: NoiseSchedule, condition_map=None):
        if not components:
            raise ValueError("mixture needs at least one component")
        self.components = list(components)
        dims = {c.mean.size for c in self.components}
        if len(dims) != 1:
            raise DimensionError(f"component means disagree on dim: {sorted(dims)}")
        self.dim = dims.pop()
        self.schedule = schedule
        self.condition_map = dict(condition_map or {})
        for name, idxs in self.condition_map.items():
            if not idxs:
                raise UnknownConditionError(f"condition {name!r} maps to no components")
            if any(i < 0 or i >= len(self.components) for i in idxs):
                raise UnknownConditionError(f"condition {name!r} has out-of-range indices")

    def active_indices(self, condition) -> list[int]:
        if condition is None:
            return list(range(len(self.components)))
        if condition not in self.condition_map:
            raise UnknownConditionError(f"unknown condition {condition!r}")
        return list(self.condition_map[condition])

    def _moments(self, t: int, condition):
        """Active weights (normalized), noised means, and per-component
        marginal variances at step t."""
        idxs = self.active_indices(condition)
        ab = self.schedule.alpha_bar(t)
        w = np.array([self.components[i].weight for i in idxs])
        w = w / w.sum()
        means = np.sqrt(ab) * np.stack([self.components[i].mean for i in idxs])
        variances = np.array([ab * self.components[i].var + 1.0 - ab for i in idxs])
        return w, means, variances

    def _responsibilities(self, z, t: int, condition):
        w, means, variances = self._moments(t, condition)
        diff = z[..., None, :] - means  # (..., K, d)
        dist2 = np.sum(diff * diff, axis=-1)  # (..., K)
        log_post = (
            np.log(w)
            - 0.5 * self.dim * np.log(2.0 * np.pi * variances)
            - 0.5 * dist2 / variances
        )
        return softmax(log_post, axis=-1), diff, variances

    def predict(self, z, t: int, condition=None) -> np.ndarray:
        return analytic_mixture_eps(self, z, t, condition, self.schedule)

    def predict_jacobian(self, z, t: int, condition=None) -> np.ndarray:
        """Closed-form d eps / d z for a single latent z of shape (d,)."""
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 1:
            raise DimensionError("jacobian is defined for a single latent")
        if t < 1:
            raise ScheduleError(f"noise prediction needs t >= 1, got {t}")
        ab = self.schedule.alpha_bar(t)
        resp, diff, variances = self._responsibilities(z, t, condition)
        comp_scores = -diff / variances[:, None]  # (K, d)
        mean_score = resp @ comp_scores
        # Hessian of log p_t: sum_k r_k (-I/V_k + g_k g_k^T) - g_bar g_bar^T
        hess = -np.sum(resp / variances) * np.eye(self.dim)
        hess += np.einsum("k,ki,kj->ij", resp, comp_scores, comp_scores)
        hess -= np.outer(mean_score, mean_score)
        return -np.sqrt(1.0 - ab) * hess


def analytic_mixture_eps(
    den: AnalyticMixtureDenoiser, z, t: int, condition, sched: NoiseSchedule
) -> np.ndarray:
    """Exact eps for mixture data via log-sum-exp responsibilities."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != den.dim:
        raise DimensionError(f"latent dim {z.shape[-1]} != model dim {den.dim}")
    if t < 1:
        raise ScheduleError(f"noise prediction needs t >= 1, got {t}")
    ab = sched.alpha_bar(t)
    idxs = den.active_indices(condition)
    w = np.array([den.components[i].weight for i in idxs])
    w = w / w.sum()
    means = np.sqrt(ab) * np.stack([den.components[i].mean for i in idxs])
    variances = np.array([ab * den.components[i].var + 1.0 - ab for i in idxs])
    diff = z[..., None, :] - means
    dist2 = np.sum(diff * diff, axis=-1)
    log_post = (
        np.log(w)
        - 0.5 * den.dim * np.log(2.0 * np.pi * variances)
        - 0.5 * dist2 / variances
    )
    resp = softmax(log_post, axis=-1)
    score = np.einsum("...k,...kd->...d", resp, -diff / variances[:, None])
    return -np.sqrt(1.0 - ab) * score


@dataclass(frozen=True)
class GuidanceConfig:
    """Classifier-free guidance: scale w, condition id, null condition id."""

    w: float = 7.5
    condition: str | None = None
    null_condition: str | None = None

    def __post_init__(self):
        if not np.isfinite(self.w):
            raise ValueError("guidance scale must be finite")


def cfg_predict(model: DenoiserModel, z, t: int, g: GuidanceConfig) -> np.ndarray:
    """w * eps(z, t, C) + (1 - w) * eps(z, t, null)."""
    eps_cond = model.predict(z, t, g.condition)
    eps_null = model.predict(z, t, g.null_condition)
    return g.w * eps_cond + (1.0 - g.w) * eps_null


def ddim_step(z_t, t: int, eps, sched: NoiseSchedule) -> np.ndarray:
    """Deterministic reverse step from z_t to z_{t-1} given predicted eps."""
    if t < 1:
        raise ScheduleError(f"reverse step needs t >= 1, got {t}")
    z_t = np.asarray(z_t, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z_t.shape != eps.shape:
        raise DimensionError(f"shape mismatch: {z_t.shape} vs {eps.shape}")
    ab_t = sched.alpha_bar(t)
    ab_prev = sched.alpha_bar(t - 1)
    scale = np.sqrt(ab_prev / ab_t)
    return scale * (z_t - np.sqrt(1.0 - ab_t) * eps) + np.sqrt(1.0 - ab_prev) * eps


class Decoder:
    """Maps a clean latent to a sample; adjoint pulls sample-space
    cotangents back to latent space."""

    def decode(self, z0) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, z0, cotangent) -> np.ndarray:
        raise NotImplementedError


class IdentityDecoder(Decoder):
    def decode(self, z0) -> np.ndarray:
        return np.asarray(z0, dtype=np.float64)

    def adjoint(self, z0, cotangent) -> np.ndarray:
        return np.asarray(cotangent, dtype=np.float64)


class LinearDecoder(Decoder):
    """Fixed linear map sample = z0 @ W^T + b with exact adjoint W^T."""

    def __init__(self, weight, offset=None):
        self.weight = np.asarray(weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise DimensionError("decoder weight must be a matrix")
        self.offset = (
            np.zeros(self.weight.shape[0])
            if offset is None
            else np.asarray(offset, dtype=np.float64)
        )
        if self.offset.shape != (self.weight.shape[0],):
            raise DimensionError("decoder offset shape mismatch")

    def decode(self, z0) -> np.ndarray:
        z0 = np.asarray(z0, dtype=np.float64)
        return z0 @ self.weight.T + self.offset

    def adjoint(self, z0, cotangent) -> np.ndarray:
        cotangent = np.asarray(cotangent, dtype=np.float64)
        return cotangent @ self.weight


@dataclass(frozen=True)
class Pipeline:
    """Immutable bundle of everything the sampler needs: model, guidance,
    schedule, and decoder. ``forward`` is pure, so repeated calls with the
    same latent are bit-identical."""

    model: DenoiserModel
    guidance: GuidanceConfig
    schedule: NoiseSchedule
    decoder: Decoder = field(default_factory=IdentityDecoder)

    @property
    def dim(self) -> int:
        return self.model.dim

    def denoise(self, z_T) -> np.ndarray:
        z = np.asarray(z_T, dtype=np.float64)
        for t in range(self.schedule.T, 0, -1):
            eps = cfg_predict(self.model, z, t, self.guidance)
            z = ddim_step(z, t, eps, self.schedule)
        return z

    def forward(self, z_T) -> tuple[np.ndarray, np.ndarray]:
        z0 = self.denoise(z_T)
        return z0, self.decoder.decode(z0)


def denoise_pipeline(
    z_T,
    model: DenoiserModel,
    g: GuidanceConfig,
    sched: NoiseSchedule,
    dec: Decoder | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the full T-step deterministic denoise and decode the result.

    Returns (z0, sample).
    """
    pipeline = Pipeline(model, g, sched, dec if dec is not None else IdentityDecoder())
    return pipeline.forward(z_T)
