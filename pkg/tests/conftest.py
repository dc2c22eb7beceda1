import json
import os
import sys

import pytest

HERE = os.path.dirname(__file__)
sys.path.insert(0, HERE)


@pytest.fixture(scope="session")
def frozen():
    with open(os.path.join(HERE, "data", "oracles.json")) as fh:
        return json.load(fh)
