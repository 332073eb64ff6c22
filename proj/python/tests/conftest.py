import pytest

import groundchat


@pytest.fixture(scope="session")
def fixtures(tmp_path_factory):
    return groundchat.write_fixtures(str(tmp_path_factory.mktemp("fx")))


@pytest.fixture(scope="session")
def dog_png(fixtures):
    with open(fixtures["dog_image"], "rb") as f:
        return f.read()


@pytest.fixture(scope="session")
def clip_wav(fixtures):
    with open(fixtures["audio"], "rb") as f:
        return f.read()
