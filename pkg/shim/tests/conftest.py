import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from fastapi.testclient import TestClient

from advlight_shim import ShimConfig, create_app

SCHEMA_DOC = json.loads((Path(__file__).resolve().parents[2] / "wire-schema.json").read_text())


def validate_message(name: str, instance) -> None:
    """Check a payload against one named message schema from wire-schema.json."""
    schema = {**SCHEMA_DOC, "$ref": f"#/messages/{name}"}
    jsonschema.Draft202012Validator(schema).validate(instance)


def rand_tensor_payload(seed: int, h: int = 6, w: int = 5):
    """Random float32 image and its wire dict, built without the server codec."""
    import base64

    rng = np.random.default_rng(seed)
    arr = rng.uniform(0.0, 1.0, size=(h, w, 3)).astype("<f4")
    payload = {
        "shape": [h, w, 3],
        "dtype": "f32",
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }
    return arr, payload


@pytest.fixture(scope="session")
def client():
    return TestClient(create_app(ShimConfig()))


@pytest.fixture
def report(capsys):
    def _report(label: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"{'PASS' if ok else 'FAIL'} [{label}] {detail}")
        assert ok, f"{label}: {detail}"

    return _report
