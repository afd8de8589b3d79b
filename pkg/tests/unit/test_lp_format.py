"""Unit tests for CPLEX LP export."""

import logging

import pytest

from lvrt_pinn.milp import MilpProblem, encode, export_lp_file, format_lp, interval_bounds


@pytest.fixture
def two_row_problem():
    """Continuous x in [0, 4], free y, binary b and two named rows."""
    problem = MilpProblem()
    x = problem.add_variable("x", 0.0, 4.0)
    y = problem.add_variable("y", float("-inf"), float("inf"))
    b = problem.add_variable("b", binary=True)
    problem.add_constraint({x: 1.0, y: 2.0}, "<=", 10.0, name="cap")
    problem.add_constraint({y: 1.5, b: -3.0}, ">=", -0.5, name="link")
    problem.set_objective({x: 3.0, y: -1.0}, maximize=True)
    return problem


EXPECTED = (
    "\\* lvrt-pinn MILP *\\\n\n"
    "Maximize\n"
    "obj:\n"
    "+3 x\n"
    "-1 y\n"
    "\n"
    "Subject To\n\n"
    "cap:\n"
    "+1 x\n"
    "+2 y\n"
    "<= 10\n\n"
    "link:\n"
    "+1.5 y\n"
    "-3 b\n"
    ">= -0.5\n\n"
    "Bounds\n"
    "   0 <= x <= 4\n"
    "    -inf <= y <= +inf\n"
    "   0 <= b <= 1\n"
    "Binary\n"
    "  b\n"
    "End\n"
)


def test_golden_text(two_row_problem):
    """Test the exact rendering of a small mixed problem."""
    assert format_lp(two_row_problem) == EXPECTED


def test_minimise_header_and_fixed_variable():
    """Test the Minimize header and the ``name = value`` bound line."""
    problem = MilpProblem()
    z = problem.add_variable("z", 2.0, 2.0)
    problem.set_objective({z: 1.0}, maximize=False)

    text = format_lp(problem)

    assert "Minimize\n" in text
    assert "   z = 2\n" in text
    assert "Binary" not in text


def test_negative_zero_is_printed_as_zero():
    """Test that -0.0 never reaches the file."""
    problem = MilpProblem()
    x = problem.add_variable("x", -1.0, 1.0)
    problem.add_constraint({x: 1.0}, "<=", -0.0, name="row")

    assert "<= 0\n" in format_lp(problem)
    assert "-0\n" not in format_lp(problem)


def test_empty_row_and_objective_get_a_zero_term():
    """Test that rows and objectives without terms still have one."""
    problem = MilpProblem()
    problem.add_variable("first", 0.0, 1.0)
    problem.add_constraint({}, "<=", 1.0, name="empty")

    text = format_lp(problem)

    assert "obj:\n+0 first\n" in text
    assert "empty:\n+0 first\n<= 1\n" in text


def test_illegal_names_are_rewritten(caplog):
    """Test renaming of illegal characters, leading digits and collisions."""
    problem = MilpProblem()
    problem.add_variable("a b", 0.0, 1.0)
    problem.add_variable("a_b", 0.0, 1.0)
    problem.add_variable("1x", 0.0, 1.0)

    with caplog.at_level(logging.WARNING):
        text = format_lp(problem)

    assert "   0 <= a_b <= 1\n" in text
    assert "   0 <= a_b_1 <= 1\n" in text
    assert "   0 <= _1x <= 1\n" in text
    assert "Renamed 3 variable name(s)" in caplog.text


@pytest.mark.parametrize(
    ("names", "expected"),
    [
        (["a_b_2", "a b", "a_b"], ["a_b_2", "a_b", "a_b_3"]),
        (["a b", "a_b", "a_b_1"], ["a_b", "a_b_1", "a_b_1_2"]),
    ],
)
def test_collision_suffix_is_unique(names, expected):
    """Test that a suffixed name never repeats a name already in use."""
    problem = MilpProblem()
    for name in names:
        problem.add_variable(name, 0.0, 1.0)

    text = format_lp(problem)

    bounds = [line.split()[2] for line in text.split("Bounds\n")[1].splitlines() if "<=" in line]
    assert bounds == expected


def test_problem_without_variables_is_refused():
    """Test that an empty problem cannot be exported."""
    with pytest.raises(ValueError):
        format_lp(MilpProblem())


def test_export_writes_formatted_text(tmp_path, small_model):
    """Test that the written file equals format_lp for an encoded network."""
    problem = encode(small_model, None, interval_bounds(small_model))
    problem.set_objective({problem.output_index("V_meas"): 1.0}, maximize=False)
    path = tmp_path / "query.lp"

    export_lp_file(problem, path)

    text = path.read_text()
    assert text == format_lp(problem)
    assert text.count("\n  b_") == len(problem.binary_indices)
    assert text.endswith("End\n")
