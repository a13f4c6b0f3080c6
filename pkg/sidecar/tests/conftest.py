import pytest
from fastapi.testclient import TestClient

from clipsidecar.service import create_app


@pytest.fixture(scope="session")
def client():
    app = create_app(model_id="hash")
    with TestClient(app) as test_client:
        yield test_client
