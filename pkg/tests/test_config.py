from __future__ import annotations

import pytest

from optforge.config import ToolConfig, load_config
from optforge.generator import BackendMode


def test_defaults_match_reference_constants():
    config = ToolConfig()
    assert config.similarity_threshold == 0.8
    assert config.max_changed_lines == 20
    assert config.max_changed_fraction == 0.20
    assert config.samples_per_program == 10
    assert config.pi_threshold == 1.2
    assert config.concurrency == 4
    assert config.formatter.external_command is None
    assert config.backend.mode is BackendMode.REPLAY


def test_load_config_without_sources_gives_defaults():
    assert load_config(path=None, env={}) == ToolConfig()


def test_load_config_from_yaml_file(tmp_path):
    path = tmp_path / "optforge.yaml"
    path.write_text(
        "similarity_threshold: 0.9\n"
        "samples_per_program: 4\n"
        "formatter:\n"
        "  external_command: [clang-format, --style=llvm]\n"
        "  on_failure: abort\n"
        "backend:\n"
        "  mode: command\n"
        "  command: [./gen.sh]\n"
    )
    config = load_config(path, env={})
    assert config.similarity_threshold == 0.9
    assert config.samples_per_program == 4
    assert config.backend.samples_per_program == 4
    assert config.formatter.external_command == ["clang-format", "--style=llvm"]
    assert config.formatter.on_failure == "abort"
    assert config.backend.mode is BackendMode.COMMAND


def test_config_path_from_environment(tmp_path):
    path = tmp_path / "conf.yaml"
    path.write_text("pi_threshold: 1.5\n")
    config = load_config(path=None, env={"OPTFORGE_CONFIG": str(path)})
    assert config.pi_threshold == 1.5


def test_env_vars_override_file(tmp_path):
    path = tmp_path / "conf.yaml"
    path.write_text("similarity_threshold: 0.9\nseed: 3\n")
    config = load_config(
        path, env={"OPTFORGE_SIMILARITY_THRESHOLD": "0.7", "OPTFORGE_SEED": "42"}
    )
    assert config.similarity_threshold == 0.7
    assert config.seed == 42


def test_backend_samples_accepted_from_backend_section(tmp_path):
    path = tmp_path / "conf.yaml"
    path.write_text("backend:\n  samples_per_program: 6\n")
    config = load_config(path, env={})
    assert config.samples_per_program == 6
    assert config.backend.samples_per_program == 6


def test_env_samples_override_propagates_to_backend(tmp_path):
    config = load_config(None, env={"OPTFORGE_SAMPLES": "2"})
    assert config.samples_per_program == 2
    assert config.backend.samples_per_program == 2


def test_validation_rejects_out_of_range_values(tmp_path):
    with pytest.raises(ValueError):
        ToolConfig(similarity_threshold=1.5)
    with pytest.raises(ValueError):
        ToolConfig(pi_threshold=0.5)
    with pytest.raises(ValueError):
        ToolConfig(concurrency=0)
    path = tmp_path / "conf.yaml"
    path.write_text("similarity_threshold: 2.0\n")
    with pytest.raises(ValueError):
        load_config(path, env={})


def test_env_overlay_is_validated(tmp_path):
    with pytest.raises(ValueError):
        load_config(None, env={"OPTFORGE_SIMILARITY_THRESHOLD": "7"})


def test_non_mapping_config_rejected(tmp_path):
    path = tmp_path / "conf.yaml"
    path.write_text("- just\n- a\n- list\n")
    with pytest.raises(ValueError):
        load_config(path, env={})
