"""Experiment configuration: a flat ``key = value`` text format with
dotted keys, plus builders that turn a parsed config into pipeline,
scorer, and optimizer objects.

Unknown keys, bad values, and inconsistent sections raise ConfigError
with the offending line number where one exists. ``resolved_text``
serializes the config with every default filled in, which each run
writes next to its CSVs.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

import numpy as np

from .diffusion import (
    AnalyticMixtureDenoiser,
    ConstantDenoiser,
    GuidanceConfig,
    IdentityDecoder,
    LinearDecoder,
    MixtureComponent,
    NoiseSchedule,
    Pipeline,
    build_schedule,
)
from .errors import ConfigError
from .latents import RngStream
from .optimizers import (
    BASELINE_METHODS,
    BaselineConfig,
    NoiseDiffusionConfig,
)
from .scoring import (
    CompositeTargetScorer,
    GradientMode,
    QuadraticSigmoidScorer,
    RemoteScorer,
    TargetGroup,
)

__all__ = ["ExperimentConfig", "parse_config_text", "load_config", "SEED_ENV_VAR"]

SEED_ENV_VAR = "NOISEDIFF_SEED"

METHODS = ("noise-diffusion",) + BASELINE_METHODS

DEFAULTS = {
    "method": "noise-diffusion",
    "dim": "64",
    "epochs": "50",
    "candidates": "50",
    "timesteps": "50",
    "seeds": "0",
    "output": "runs/latest",
    "guidance.scale": "7.5",
    "guidance.condition": "",
    "guidance.null_condition": "",
    "schedule.beta_start": "0.0001",
    "schedule.beta_end": "0.02",
    "denoiser.type": "mixture",
    "decoder.type": "identity",
    "scorer.type": "quadratic-sigmoid",
    "gradient.mode": "approx-constant-eps",
    "v_norm_guard": "1e-12",
    "strict": "false",
    "pgd.step": "0.05",
    "pgd.radius": "0.5",
    "mv.learning_rate": "0.01",
    "mv.beta1": "0.9",
    "mv.beta2": "0.999",
    "mv.epsilon": "1e-8",
}

_KEY_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, tuple[str, int]]:
    """Parse ``key = value`` lines into {key: (value, line_number)}.

    Blank lines and ``#`` comments are ignored; duplicate keys and
    malformed lines are errors.
    """
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"{source}: line {lineno}: invalid key {key!r}")
        if key in entries:
            raise ConfigError(
                f"{source}: line {lineno}: duplicate key {key!r} "
                f"(first set on line {entries[key][1]})"
            )
        entries[key] = (value, lineno)
    return entries


@dataclass
class ExperimentConfig:
    """Validated experiment description plus the fully resolved flat map."""

    method: str
    dim: int
    epochs: int
    candidates: int
    timesteps: int
    seeds: list[int]
    output: str
    resolved: dict[str, str] = field(default_factory=dict)
    source: str = "<config>"

    # ---- construction -------------------------------------------------

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        entries = parse_config_text(text, source)
        return cls._build(entries, source)

    @classmethod
    def _build(cls, entries, source):
        reader = _Reader(entries, source)
        method = reader.choice("method", METHODS)
        dim = reader.int("dim", minimum=1)
        epochs = reader.int("epochs", minimum=0)
        candidates = reader.int("candidates", minimum=1)
        timesteps = reader.int("timesteps", minimum=1)
        seeds = cls._resolve_seeds(reader)
        output = reader.str("output")

        cfg = cls(
            method=method,
            dim=dim,
            epochs=epochs,
            candidates=candidates,
            timesteps=timesteps,
            seeds=seeds,
            output=output,
            source=source,
        )
        cfg._reader = reader
        # touch every supported key so unknown ones can be rejected and the
        # resolved map is complete
        try:
            cfg.build_pipeline()
            scorer = cfg.build_scorer()
            cfg.noise_diffusion_config()
            cfg.baseline_config()
        except ConfigError:
            raise
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{source}: {exc}")
        gradient_methods = ("noise-diffusion", "pgd", "mean-variance")
        if (
            method in gradient_methods
            and isinstance(scorer, RemoteScorer)
            and cfg.gradient_mode() is not GradientMode.FINITE_DIFFERENCE
        ):
            raise ConfigError(
                f"{source}: remote scorers expose no analytic gradient; "
                f"set gradient.mode = finite-difference or use a score-only method"
            )
        reader.reject_unknown()
        cfg.resolved = reader.resolved()
        cfg.resolved["seeds"] = ",".join(str(s) for s in seeds)
        cfg.resolved.pop("seeds.count", None)
        return cfg

    @staticmethod
    def _resolve_seeds(reader) -> list[int]:
        explicit = reader.int_list("seeds", DEFAULTS["seeds"])
        count = reader.opt_int("seeds.count", minimum=1)
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            try:
                return [int(env)]
            except ValueError:
                raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}")
        if count is not None:
            return list(range(count))
        return explicit

    # ---- builders ------------------------------------------------------

    def build_schedule(self) -> NoiseSchedule:
        r = self._reader
        try:
            return build_schedule(
                self.timesteps,
                r.float("schedule.beta_start", DEFAULTS["schedule.beta_start"]),
                r.float("schedule.beta_end", DEFAULTS["schedule.beta_end"]),
            )
        except Exception as exc:
            raise r.error("schedule.beta_start", str(exc))

    def build_pipeline(self) -> Pipeline:
        r = self._reader
        schedule = self.build_schedule()
        den_type = r.choice("denoiser.type", ("mixture", "constant"), DEFAULTS["denoiser.type"])
        if den_type == "constant":
            value = r.vector("denoiser.constant.value", self.dim, "0.0")
            model = ConstantDenoiser(value)
        else:
            indices = sorted(
                {
                    int(m.group(1))
                    for key in r.keys_with_prefix("denoiser.component.")
                    if (m := re.match(r"denoiser\.component\.(\d+)\.", key))
                }
            )
            if not indices:
                indices = [0]  # default: single standard-normal component
            if indices != list(range(len(indices))):
                raise r.error("denoiser.type", f"component indices must be 0..K-1, got {indices}")
            components = []
            for k in indices:
                prefix = f"denoiser.component.{k}"
                components.append(
                    MixtureComponent(
                        weight=r.float(f"{prefix}.weight", "1.0"),
                        mean=self._config_vector(f"{prefix}.mean", f"{prefix}.mean_seed"),
                        var=r.float(f"{prefix}.var", "1.0"),
                    )
                )
            condition_map = {}
            for key in r.keys_with_prefix("denoiser.condition."):
                name = key[len("denoiser.condition.") :]
                condition_map[name] = r.int_list(key)
            try:
                model = AnalyticMixtureDenoiser(components, schedule, condition_map)
            except Exception as exc:
                raise r.error("denoiser.type", str(exc))
        if model.dim != self.dim:
            raise r.error("dim", f"denoiser dim {model.dim} != configured dim {self.dim}")

        guidance = GuidanceConfig(
            w=r.float("guidance.scale", DEFAULTS["guidance.scale"]),
            condition=r.str("guidance.condition", "") or None,
            null_condition=r.str("guidance.null_condition", "") or None,
        )

        dec_type = r.choice("decoder.type", ("identity", "linear"), DEFAULTS["decoder.type"])
        if dec_type == "identity":
            decoder = IdentityDecoder()
        else:
            rows = r.int("decoder.linear.rows", minimum=1)
            seed = r.int("decoder.linear.seed", default=0)
            gen = RngStream(seed, "decoder").generator()
            weight = gen.standard_normal((rows, self.dim)) / np.sqrt(self.dim)
            decoder = LinearDecoder(weight)
        return Pipeline(model, guidance, schedule, decoder)

    def _config_vector(self, key, seed_key):
        """A d-vector from an explicit list, a broadcast scalar, or a
        seeded standard-normal draw."""
        r = self._reader
        if r.has(seed_key):
            seed = r.int(seed_key)
            return RngStream(seed, key).normal(self.dim)
        return r.vector(key, self.dim, "0.0")

    def sample_dim(self) -> int:
        r = self._reader
        if r.choice("decoder.type", ("identity", "linear"), DEFAULTS["decoder.type"]) == "linear":
            return r.int("decoder.linear.rows", minimum=1)
        return self.dim

    def build_scorer(self):
        r = self._reader
        sdim = self.sample_dim()
        stype = r.choice(
            "scorer.type",
            ("quadratic-sigmoid", "composite", "remote"),
            DEFAULTS["scorer.type"],
        )
        if stype == "quadratic-sigmoid":
            target = self._scorer_vector("scorer.quadratic.target",
                                         "scorer.quadratic.target_seed", sdim)
            return QuadraticSigmoidScorer(
                target=target,
                sharpness=r.float("scorer.quadratic.sharpness", "0.5"),
                offset=r.float("scorer.quadratic.offset", "0.0"),
            )
        if stype == "composite":
            groups = []
            j = 0
            while r.has(f"scorer.group.{j}.indices"):
                prefix = f"scorer.group.{j}"
                indices = r.index_list(f"{prefix}.indices")
                if any(i >= sdim for i in indices):
                    raise r.error(f"{prefix}.indices", f"index beyond sample dim {sdim}")
                target = self._scorer_vector(
                    f"{prefix}.target", f"{prefix}.target_seed", len(indices)
                )
                groups.append(
                    TargetGroup(
                        indices=tuple(indices),
                        target=target,
                        radius=r.float(f"{prefix}.radius", "1.0"),
                        sharpness=r.float(f"{prefix}.sharpness", "1.0"),
                    )
                )
                j += 1
            if not groups:
                raise r.error("scorer.type", "composite scorer needs scorer.group.0.*")
            return CompositeTargetScorer(groups)
        # remote
        endpoint = r.str("scorer.remote.endpoint")
        if not endpoint:
            raise r.error("scorer.remote.endpoint", "remote scorer needs an endpoint")
        return RemoteScorer(
            endpoint=endpoint,
            prompt=r.str("scorer.prompt", "a synthetic benchmark target"),
            timeout=r.float("scorer.remote.timeout_ms", "1000") / 1e3,
            retries=r.int("scorer.remote.retries", default=1),
        )

    def _scorer_vector(self, key, seed_key, length):
        r = self._reader
        if r.has(seed_key):
            return RngStream(r.int(seed_key), key).normal(length)
        return r.vector(key, length, "0.0")

    def gradient_mode(self) -> GradientMode:
        value = self._reader.choice(
            "gradient.mode",
            tuple(m.value for m in GradientMode),
            DEFAULTS["gradient.mode"],
        )
        return GradientMode(value)

    def noise_diffusion_config(self) -> NoiseDiffusionConfig:
        r = self._reader
        return NoiseDiffusionConfig(
            epochs=self.epochs,
            candidates=self.candidates,
            gradient_mode=self.gradient_mode(),
            v_norm_guard=r.float("v_norm_guard", DEFAULTS["v_norm_guard"]),
            fd_step=r.opt_float("gradient.fd_step"),
            fd_budget=r.opt_int("gradient.fd_budget", minimum=1),
            strict_improvement=r.bool("strict", DEFAULTS["strict"]),
        )

    def baseline_config(self) -> BaselineConfig:
        r = self._reader
        method = self.method if self.method in BASELINE_METHODS else "random-sampling"
        return BaselineConfig(
            method=method,
            pgd_step=r.float("pgd.step", DEFAULTS["pgd.step"]),
            pgd_radius=r.float("pgd.radius", DEFAULTS["pgd.radius"]),
            mv_learning_rate=r.float("mv.learning_rate", DEFAULTS["mv.learning_rate"]),
            mv_beta1=r.float("mv.beta1", DEFAULTS["mv.beta1"]),
            mv_beta2=r.float("mv.beta2", DEFAULTS["mv.beta2"]),
            mv_epsilon=r.float("mv.epsilon", DEFAULTS["mv.epsilon"]),
            gradient_mode=self.gradient_mode(),
            fd_step=r.opt_float("gradient.fd_step"),
            fd_budget=r.opt_int("gradient.fd_budget", minimum=1),
        )

    def resolved_text(self) -> str:
        """Flat serialization with defaults filled in; empty-valued keys
        (unset optionals) are dropped so the text re-parses as-is."""
        lines = [f"{k} = {v}" for k, v in sorted(self.resolved.items()) if v != ""]
        return "\n".join(lines) + "\n"


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}")
    return ExperimentConfig.from_text(text, source=str(path))


class _Reader:
    """Typed access to parsed entries with line-numbered diagnostics and
    a record of every key consulted (for the resolved sidecar)."""

    def __init__(self, entries, source):
        self.entries = entries
        self.source = source
        self.used: dict[str, str] = {}

    def has(self, key) -> bool:
        return key in self.entries

    def keys_with_prefix(self, prefix) -> list[str]:
        return sorted(k for k in self.entries if k.startswith(prefix))

    def error(self, key, message) -> ConfigError:
        if key in self.entries:
            return ConfigError(f"{self.source}: line {self.entries[key][1]}: {key}: {message}")
        return ConfigError(f"{self.source}: {key}: {message}")

    def _raw(self, key, default):
        if key in self.entries:
            value = self.entries[key][0]
        elif default is not None:
            value = default
        elif key in DEFAULTS:
            value = DEFAULTS[key]
        else:
            raise ConfigError(f"{self.source}: missing required key {key!r}")
        self.used[key] = value
        return value

    def str(self, key, default=None) -> str:
        return self._raw(key, default)

    def choice(self, key, options, default=None) -> str:
        value = self._raw(key, default)
        if value not in options:
            raise self.error(key, f"expected one of {', '.join(options)}; got {value!r}")
        return value

    def bool(self, key, default=None) -> bool:
        value = self._raw(key, default).lower()
        if value in ("true", "1", "yes"):
            return True
        if value in ("false", "0", "no"):
            return False
        raise self.error(key, f"expected true/false, got {value!r}")

    def int(self, key, minimum=None, default=None) -> int:
        raw = self._raw(key, str(default) if default is not None else None)
        try:
            value = int(raw)
        except ValueError:
            raise self.error(key, f"expected an integer, got {raw!r}")
        if minimum is not None and value < minimum:
            raise self.error(key, f"must be >= {minimum}, got {value}")
        return value

    def opt_int(self, key, minimum=None) -> int | None:
        """Integer that may be omitted entirely (no default)."""
        if key not in self.entries:
            self.used.setdefault(key, "")
            return None
        return self.int(key, minimum=minimum)

    def float(self, key, default=None) -> float:
        raw = self._raw(key, str(default) if default is not None else None)
        try:
            return float(raw)
        except ValueError:
            raise self.error(key, f"expected a number, got {raw!r}")

    def opt_float(self, key) -> float | None:
        if key not in self.entries:
            self.used.setdefault(key, "")
            return None
        return self.float(key)

    def int_list(self, key, default=None) -> list[int]:
        raw = self._raw(key, default)
        try:
            return [int(part) for part in raw.split(",") if part.strip() != ""]
        except ValueError:
            raise self.error(key, f"expected comma-separated integers, got {raw!r}")

    def index_list(self, key) -> list[int]:
        """Comma-separated indices; ``a-b`` expands to the inclusive range."""
        raw = self._raw(key, None)
        out: list[int] = []
        for part in raw.split(","):
            part = part.strip()
            if not part:
                continue
            m = re.fullmatch(r"(\d+)-(\d+)", part)
            if m:
                lo, hi = int(m.group(1)), int(m.group(2))
                if hi < lo:
                    raise self.error(key, f"empty range {part!r}")
                out.extend(range(lo, hi + 1))
                continue
            try:
                out.append(int(part))
            except ValueError:
                raise self.error(key, f"expected indices or ranges, got {part!r}")
        if not out:
            raise self.error(key, "index list is empty")
        return out

    def vector(self, key, length, default=None) -> np.ndarray:
        """A float vector: comma list of exactly ``length`` entries, or a
        single scalar broadcast to ``length``."""
        raw = self._raw(key, default)
        parts = [p for p in raw.split(",") if p.strip() != ""]
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise self.error(key, f"expected numbers, got {raw!r}")
        if len(values) == 1:
            return np.full(length, values[0])
        if len(values) != length:
            raise self.error(key, f"expected 1 or {length} entries, got {len(values)}")
        return np.array(values)

    def reject_unknown(self):
        unknown = set(self.entries) - set(self.used)
        for key in sorted(unknown):
            _, lineno = self.entries[key]
            raise ConfigError(f"{self.source}: line {lineno}: unknown key {key!r}")

    def resolved(self) -> dict[str, str]:
        return dict(self.used)
