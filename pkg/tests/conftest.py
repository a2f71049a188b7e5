import sys
from fractions import Fraction

import pytest

from seqauction import sequential_game as sg
from seqauction.matroid import GraphicalMatroid, weighted
from seqauction.stage_auction import as_matrix
from seqauction.valuations import additive, unit_demand

FIX_A = as_matrix([[5, 0, 0], [0, 3, 0], [0, 0, 2]])
FIX_B = as_matrix([[6, 5], [0, 4]])
FIX_C = as_matrix([[0, 5], [5, 0]])


def intro_instance(fmt="first"):
    """Additive player worth 5 per item against a unit-demand player worth 4."""
    players = [additive({"A": 5, "B": 5}), unit_demand({"A": 4, "B": 4})]
    return sg.sequential_instance(players, ["A", "B"], fmt)


def triangle(mode="direct"):
    g = GraphicalMatroid(["u", "v", "w"], [("e1", "u", "v"), ("e2", "v", "w"), ("e3", "u", "w")])
    return weighted(g, {"e1": 5, "e2": 3, "e3": 2}, mode)


@pytest.fixture
def intro():
    return intro_instance()


@pytest.fixture
def tri():
    return triangle()


Q = Fraction


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
