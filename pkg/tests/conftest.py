import json

import pytest

from lmce.cases import builtin_case
from lmce.grid import case_to_dict


@pytest.fixture
def paper_case():
    return builtin_case("paper-3bus")


@pytest.fixture(scope="session")
def six_bus():
    return builtin_case("synthetic-6bus-24h")


@pytest.fixture
def paper_json(tmp_path, paper_case):
    def write(**overrides):
        data = case_to_dict(paper_case)
        for key, value in overrides.items():
            data[key] = value
        path = tmp_path / "case.json"
        path.write_text(json.dumps(data))
        return path

    return write
