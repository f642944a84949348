import numpy as np
import pytest
from PIL import Image

from redactcert_bridge.bundle_builder import build_bundle
from redactcert_bridge.config import BridgeConfig
from redactcert_bridge.models import load_model


@pytest.fixture(scope="session")
def toy_config():
    return BridgeConfig(model="toy-cnn", grid_rows=4, grid_cols=4, ig_steps=4, seed=0)


@pytest.fixture(scope="session")
def toy_model(toy_config):
    return load_model(toy_config)


@pytest.fixture(scope="session")
def image_path(tmp_path_factory):
    rng = np.random.default_rng(42)
    arr = rng.integers(0, 255, size=(48, 64, 3), dtype=np.uint8)
    path = tmp_path_factory.mktemp("images") / "sample.png"
    Image.fromarray(arr).save(path)
    return path


@pytest.fixture(scope="session")
def toy_bundle(tmp_path_factory, toy_config, toy_model, image_path):
    out = tmp_path_factory.mktemp("bundles") / "toy"
    return build_bundle(image_path, toy_config, [0, 1], out, toy_model)
