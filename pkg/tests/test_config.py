import numpy as np
import pytest

from noisediff.config import SEED_ENV_VAR, ExperimentConfig, parse_config_text
from noisediff.errors import ConfigError
from noisediff.scoring import CompositeTargetScorer, QuadraticSigmoidScorer, RemoteScorer

MINIMAL = "method = noise-diffusion\ndim = 8\n"


class TestParse:
    def test_key_values_with_comments(self):
        entries = parse_config_text("# header\n\nfoo = 1\nbar.baz = a b\n")
        assert entries["foo"] == ("1", 3)
        assert entries["bar.baz"] == ("a b", 4)

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("a = 1\nnot a pair\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config_text("a = 1\n\na = 2\n")

    def test_invalid_key(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("bad key = 1\n")


class TestExperimentConfig:
    def test_defaults(self):
        cfg = ExperimentConfig.from_text(MINIMAL)
        assert (cfg.epochs, cfg.candidates, cfg.timesteps) == (50, 50, 50)
        assert cfg.resolved["guidance.scale"] == "7.5"
        assert cfg.seeds == [0]

    def test_unknown_key_line_numbered(self):
        with pytest.raises(ConfigError, match="line 3.*mystery"):
            ExperimentConfig.from_text(MINIMAL + "mystery = 4\n")

    def test_bad_value_line_numbered(self):
        with pytest.raises(ConfigError, match="line 3"):
            ExperimentConfig.from_text(MINIMAL + "epochs = soon\n")

    def test_zero_epochs_allowed(self):
        cfg = ExperimentConfig.from_text(MINIMAL + "epochs = 0\n")
        assert cfg.epochs == 0

    def test_zero_candidates_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text(MINIMAL + "candidates = 0\n")

    def test_zero_timesteps_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text(MINIMAL + "timesteps = 0\n")

    def test_seed_list_and_count(self):
        cfg = ExperimentConfig.from_text(MINIMAL + "seeds = 3,5,9\n")
        assert cfg.seeds == [3, 5, 9]
        cfg = ExperimentConfig.from_text(MINIMAL + "seeds.count = 4\n")
        assert cfg.seeds == [0, 1, 2, 3]

    def test_env_seed_override(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "77")
        cfg = ExperimentConfig.from_text(MINIMAL + "seeds = 1,2,3\n")
        assert cfg.seeds == [77]
        monkeypatch.setenv(SEED_ENV_VAR, "x")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text(MINIMAL)

    def test_resolved_text_roundtrip(self):
        cfg = ExperimentConfig.from_text(MINIMAL + "epochs = 7\nscorer.type = quadratic-sigmoid\n")
        again = ExperimentConfig.from_text(cfg.resolved_text())
        assert again.resolved == cfg.resolved

    def test_method_validated(self):
        with pytest.raises(ConfigError, match="one of"):
            ExperimentConfig.from_text("method = hill-climb\ndim = 8\n")


class TestBuilders:
    def test_default_pipeline_shape(self):
        cfg = ExperimentConfig.from_text(MINIMAL)
        pipe = cfg.build_pipeline()
        assert pipe.dim == 8
        assert pipe.schedule.T == 50
        assert pipe.guidance.w == 7.5

    def test_vector_broadcast_and_list(self):
        text = MINIMAL + (
            "denoiser.component.0.mean = 1.5\n"
            "denoiser.component.1.mean = 1,2,3,4,5,6,7,8\n"
            "denoiser.component.1.weight = 0.5\n"
        )
        cfg = ExperimentConfig.from_text(text)
        model = cfg.build_pipeline().model
        np.testing.assert_array_equal(model.components[0].mean, np.full(8, 1.5))
        np.testing.assert_array_equal(model.components[1].mean, np.arange(1.0, 9.0))

    def test_vector_length_mismatch(self):
        with pytest.raises(ConfigError, match="denoiser.component.0.mean"):
            ExperimentConfig.from_text(MINIMAL + "denoiser.component.0.mean = 1,2,3\n")

    def test_component_indices_must_be_contiguous(self):
        with pytest.raises(ConfigError, match="0..K-1"):
            ExperimentConfig.from_text(MINIMAL + "denoiser.component.2.weight = 1\n")

    def test_seeded_mean_is_deterministic(self):
        text = MINIMAL + "denoiser.component.0.mean_seed = 9\n"
        a = ExperimentConfig.from_text(text).build_pipeline().model.components[0].mean
        b = ExperimentConfig.from_text(text).build_pipeline().model.components[0].mean
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, np.zeros(8))

    def test_composite_scorer_with_ranges(self):
        text = MINIMAL + (
            "scorer.type = composite\n"
            "scorer.group.0.indices = 0-3\n"
            "scorer.group.0.target = 0.5\n"
            "scorer.group.1.indices = 4,5,6,7\n"
            "scorer.group.1.target = -0.5\n"
        )
        scorer = ExperimentConfig.from_text(text).build_scorer()
        assert isinstance(scorer, CompositeTargetScorer)
        assert scorer.groups[0].indices == (0, 1, 2, 3)
        assert scorer.groups[1].indices == (4, 5, 6, 7)

    def test_composite_index_beyond_dim(self):
        text = MINIMAL + "scorer.type = composite\nscorer.group.0.indices = 6-9\nscorer.group.0.target = 0\n"
        with pytest.raises(ConfigError, match="beyond sample dim"):
            ExperimentConfig.from_text(text)

    def test_quadratic_scorer_default(self):
        scorer = ExperimentConfig.from_text(MINIMAL).build_scorer()
        assert isinstance(scorer, QuadraticSigmoidScorer)

    def test_remote_scorer_requires_endpoint(self):
        with pytest.raises(ConfigError, match="endpoint"):
            ExperimentConfig.from_text(MINIMAL + "scorer.type = remote\n")

    def test_remote_scorer_built(self):
        text = "method = random-sampling\ndim = 8\n" + (
            "scorer.type = remote\n"
            "scorer.remote.endpoint = http://127.0.0.1:1/score\n"
            "scorer.remote.timeout_ms = 250\n"
            "scorer.prompt = a lion and a monkey\n"
        )
        scorer = ExperimentConfig.from_text(text).build_scorer()
        assert isinstance(scorer, RemoteScorer)
        assert scorer.timeout == 0.25

    def test_linear_decoder_sets_sample_dim(self):
        text = MINIMAL + "decoder.type = linear\ndecoder.linear.rows = 3\n"
        cfg = ExperimentConfig.from_text(text)
        assert cfg.sample_dim() == 3
        z0 = np.zeros(8)
        assert cfg.build_pipeline().decoder.decode(z0).shape == (3,)

    def test_dim_mismatch_with_denoiser(self):
        text = "method = noise-diffusion\ndim = 4\ndenoiser.component.0.mean = 1,2,3,4,5\n"
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text(text)

    def test_schedule_keys(self):
        text = MINIMAL + "schedule.beta_start = 0.01\nschedule.beta_end = 0.2\ntimesteps = 5\n"
        sched = ExperimentConfig.from_text(text).build_schedule()
        assert sched.T == 5
        assert sched.betas[0] == 0.01
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text(MINIMAL + "schedule.beta_start = 0.9\nschedule.beta_end = 0.1\n")

    def test_gradient_and_strict_options(self):
        text = MINIMAL + "gradient.mode = finite-difference\ngradient.fd_budget = 4\nstrict = true\n"
        nd = ExperimentConfig.from_text(text).noise_diffusion_config()
        assert nd.gradient_mode.value == "finite-difference"
        assert nd.fd_budget == 4
        assert nd.strict_improvement


class TestConstructionErrorsBecomeConfigErrors:
    @pytest.mark.parametrize(
        "extra",
        [
            "guidance.scale = nan\n",
            "scorer.quadratic.sharpness = -1\n",
            "denoiser.component.0.weight = 0\n",
            "denoiser.condition.a = 5\n",
        ],
    )
    def test_invalid_values(self, extra):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text(MINIMAL + extra)


class TestRemoteGradientCompatibility:
    REMOTE = (
        MINIMAL
        + "scorer.type = remote\nscorer.remote.endpoint = http://127.0.0.1:1/s\n"
    )

    def test_gradient_method_needs_fd(self):
        with pytest.raises(ConfigError, match="finite-difference"):
            ExperimentConfig.from_text(self.REMOTE)

    def test_fd_mode_accepted(self):
        cfg = ExperimentConfig.from_text(
            self.REMOTE + "gradient.mode = finite-difference\ngradient.fd_budget = 2\n"
        )
        assert cfg.noise_diffusion_config().fd_budget == 2

    def test_score_only_methods_accepted(self):
        cfg = ExperimentConfig.from_text(self.REMOTE.replace(
            "method = noise-diffusion", "method = random-diffusion"))
        assert cfg.method == "random-diffusion"
