"""Pytest fixtures over the shared builders in helpers.py."""

import pytest

from helpers import FIXTURE_ARPA, letter_vocab
from lga.lm import parse_arpa


@pytest.fixture
def fixture_lm():
    return parse_arpa(FIXTURE_ARPA)


@pytest.fixture
def ab_vocab():
    return letter_vocab("AB")
