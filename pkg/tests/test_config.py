import time

import pytest
import yaml

from ipcwk.common import Common
from ipcwk.config.config import DEFAULTS, LAST_CONFIG_VERSION, Config
from ipcwk.errors import ConfigError
from ipcwk.log import LogHolder
from ipcwk.version import VERSION


def test_first_run_creates_files(config_dir):
    assert Common.confdir() == config_dir
    config = yaml.safe_load((config_dir / "config.yaml").read_text(encoding="utf-8"))
    assert config["version"] == LAST_CONFIG_VERSION
    assert config["library_version"] == VERSION
    assert config["defaults"] == DEFAULTS
    assert (config_dir / "style.yaml").exists()
    assert Common.Configuration.default("grid_steps") == 201


def test_upgrade_from_first_version(tmp_path):
    (tmp_path / "config.yaml").write_text(
        yaml.dump({"version": 1, "defaults": {"kernel": "box"}}), encoding="utf-8"
    )
    config = Config(tmp_path)
    assert config.initialize() == []
    assert config["version"] == LAST_CONFIG_VERSION
    assert config["threads"] == 1
    assert config["log_retention"]["max_lines"] == 1000
    assert config.default("kernel") == "box"
    assert config.default("theta") == DEFAULTS["theta"]
    on_disk = yaml.safe_load((tmp_path / "config.yaml").read_text(encoding="utf-8"))
    assert on_disk["library_version"] == VERSION


def test_unversioned_configuration_gets_defaults(tmp_path):
    (tmp_path / "config.yaml").write_text("threads: 3\n", encoding="utf-8")
    config = Config(tmp_path)
    config.initialize()
    assert config["defaults"] == DEFAULTS
    assert config["threads"] == 1


def test_newer_configuration_is_reported(config_dir):
    config_dir.mkdir()
    (config_dir / "config.yaml").write_text(
        yaml.dump({"version": LAST_CONFIG_VERSION, "library_version": "99.0", "defaults": dict(DEFAULTS), "threads": 1}),
        encoding="utf-8",
    )
    Common.initialize()
    entry = Common.entries(category="Core")[0]
    assert entry["summary"] == "Configuration version"
    assert "99.0" in entry["message"]
    assert Common.Configuration["library_version"] == "99.0"


def test_log_entries(config_dir):
    Common.info("first", "One", "Bands")
    Common.warning("second", "Two", "Simulation", subcategory="coverage", n=20)
    entries = Common.entries()
    assert [entry["summary"] for entry in entries] == ["Two", "One"]
    assert entries[0]["context"] == {"n": 20}
    assert entries[0]["subcategory"] == "coverage"
    assert entries[0]["time"].endswith("UTC")
    assert [entry["summary"] for entry in Common.entries(category="Bands")] == ["One"]
    assert len(Common.entries(limit=1)) == 1
    Common.reset()
    assert [entry["message"] for entry in Common.entries()] == ["second", "first"]


def test_echo_respects_quiet(capsys):
    Common.quiet = False
    Common.warning("loud", "Echo", "Core")
    Common.quiet = True
    Common.warning("silent", "Echo", "Core")
    Common.log_exception(ValueError("hidden"), "Core")
    err = capsys.readouterr().err
    assert "[warning] Echo: loud" in err
    assert "silent" not in err
    assert "hidden" not in err
    assert Common.entries(limit=1)[0]["summary"] == "ValueError"


def test_log_retention_by_lines(tmp_path):
    holder = LogHolder(tmp_path / "log.yaml", {"max_lines": 2, "max_age": -1})
    for idx in range(4):
        holder.log(f"message {idx}", "Summary", "Core", "info")
    assert [entry["message"] for entry in LogHolder(tmp_path / "log.yaml", {}).entries()] == ["message 3", "message 2"]


def test_log_retention_by_age(tmp_path):
    holder = LogHolder(tmp_path / "log.yaml", {"max_lines": -1, "max_age": 100})
    holder.raw_entries = [
        {"summary": "Old", "category": "Core", "timestamp": time.time() - 1000, "context": "{}"},
    ]
    holder.log("new", "New", "Core", "info")
    assert [entry["summary"] for entry in holder.entries()] == ["New"]


def test_thread_count(monkeypatch):
    assert Common.threads() == 1
    Common.Configuration["threads"] = 3
    assert Common.threads() == 3
    monkeypatch.setenv("IPCWK_THREADS", "5")
    assert Common.threads() == 5
    monkeypatch.setenv("IPCWK_THREADS", "many")
    assert Common.threads() == 3
    assert Common.entries(limit=1)[0]["summary"] == "Thread count"


def test_scheme_reset_keeps_backup(config_dir):
    Common.initialize()
    scheme = Common.Configuration.scheme
    scheme.style["figure"]["width"] = 12.0
    scheme.write_config()
    scheme.backup_and_reset()
    backup = yaml.safe_load((config_dir / "style.yaml.bak").read_text(encoding="utf-8"))
    assert backup["figure"]["width"] == 12.0
    assert scheme["figure"]["width"] == 6.4
    assert scheme.line("truth") == {"color": "#000000", "linestyle": "-", "linewidth": 1.2}


def test_custom_style_file(tmp_path):
    (tmp_path / "config.yaml").write_text(
        yaml.dump({"version": LAST_CONFIG_VERSION, "figure_style": "print.yaml", "defaults": dict(DEFAULTS)}),
        encoding="utf-8",
    )
    (tmp_path / "print.yaml").write_text(yaml.dump({"lines": {"band": {"color": "red"}}}), encoding="utf-8")
    assert Config(tmp_path).scheme.line("band") == {"color": "red"}


def test_unreadable_configuration_files(tmp_path):
    (tmp_path / "config.yaml").write_text("version: [\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        Config(tmp_path)
    (tmp_path / "config.yaml").write_text("- just\n- a list\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        Config(tmp_path)
    (tmp_path / "config.yaml").write_text(
        yaml.dump({"version": LAST_CONFIG_VERSION, "figure_style": "style.yaml", "defaults": dict(DEFAULTS)}),
        encoding="utf-8",
    )
    (tmp_path / "style.yaml").write_text("lines: {band: [\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        Config(tmp_path)
