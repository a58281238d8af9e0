"""Shared pytest configuration: full-scale runs are opt-in via ACTIVECLUST_SLOW=1."""

import csv
import os

import pytest


def pytest_collection_modifyitems(config, items):
    if os.environ.get("ACTIVECLUST_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="full-scale run; set ACTIVECLUST_SLOW=1 to enable")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def read_csv():
    """Reader returning the rows of a written CSV as string dicts."""

    def _read(path):
        with open(path, newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))

    return _read
