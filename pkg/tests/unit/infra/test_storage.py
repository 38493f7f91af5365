from pathlib import Path

import pytest

from src.core import models
from src.core.validation import config_hash
from src.infra.storage import ConfigStore


def test_load_missing_file_is_a_config_error(tmp_path: Path):
    store = ConfigStore(path=tmp_path / "run.cfg")
    with pytest.raises(models.ConfigError, match="not found"):
        store.load()


def test_save_and_load_roundtrip(tmp_path: Path):
    store = ConfigStore(path=tmp_path / "nested" / "run.cfg")
    original = models.RunConfig(neck="sparsemax", prototypes=24, align_coef_start=8.0, align_coef_end=8.0, seed=3)

    store.save(original)
    loaded = store.load()

    assert loaded == original
    assert not (tmp_path / "nested" / "run.cfg.tmp").exists()


def test_saved_file_starts_with_the_hash(tmp_path: Path):
    config = models.RunConfig(epochs=4)
    store = ConfigStore(path=tmp_path / "run.cfg")
    store.save(config)
    assert store.path.read_text().splitlines()[0] == f"# protoneck run config, hash {config_hash(config)}"


def test_errors_name_file_and_line(tmp_path: Path):
    path = tmp_path / "run.cfg"
    path.write_text("epochs = 3\nneck = fancy\n")
    with pytest.raises(models.ConfigError) as info:
        ConfigStore(path=path).load()
    message = str(info.value)
    assert str(path) in message
    assert "line 2" in message


def test_load_on_top_of_a_base(tmp_path: Path):
    path = tmp_path / "run.cfg"
    path.write_text("epochs = 3\n")
    loaded = ConfigStore(path=path).load(base=models.RunConfig(prototypes=20))
    assert (loaded.epochs, loaded.prototypes) == (3, 20)
