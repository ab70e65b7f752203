"""External-process evaluator: JSON-lines protocol over stdio."""

import sys
import textwrap

import numpy as np
import pytest

from s4is.errors import ConfigError, EvaluationError, ProtocolError
from s4is.evaluation import Evaluator, external_problem
from s4is.probability import Marginal, RandomVector

TWO_NORMALS = RandomVector((Marginal("normal", 1.5, 1.0),
                            Marginal("normal", 2.5, 1.0)))


def _child(tmp_path, body):
    """Write a child script that reads requests line by line."""
    script = tmp_path / "child.py"
    script.write_text(textwrap.dedent("""\
        import json, sys, math
        for line in sys.stdin:
            req = json.loads(line)
    """) + textwrap.indent(textwrap.dedent(body), "    "))
    return [sys.executable, str(script)]


WELL_BEHAVED = """\
t1, t2 = req["theta"]
g = -((t1 * t1 + 4.0) * (t2 - 1.0)) / 20.0 + math.sin(2.5 * t1) + 2.0
print(json.dumps({"id": req["id"], "g": g}), flush=True)
"""


def test_external_matches_local_function(tmp_path):
    problem = external_problem(_child(tmp_path, WELL_BEHAVED), 2, TWO_NORMALS)
    ev = Evaluator(problem)
    try:
        assert ev.g(np.array([0.0, 0.0])) == pytest.approx(2.2, abs=1e-9)
        assert ev.g(np.array([1.5, 2.5])) == pytest.approx(0.9596887, abs=1e-6)
        assert ev.ledger.count == 2
        # cache hit: no third round trip
        ev.g(np.array([0.0, 0.0]))
        assert ev.ledger.count == 2
    finally:
        problem.components[0].close()


def test_external_error_response(tmp_path):
    cmd = _child(tmp_path, """\
print(json.dumps({"id": req["id"], "error": "nan encountered"}), flush=True)
""")
    problem = external_problem(cmd, 2, TWO_NORMALS)
    try:
        with pytest.raises(EvaluationError, match="nan encountered"):
            Evaluator(problem).g(np.zeros(2))
    finally:
        problem.components[0].close()


def test_external_id_mismatch(tmp_path):
    cmd = _child(tmp_path, """\
print(json.dumps({"id": 999, "g": 0.0}), flush=True)
""")
    problem = external_problem(cmd, 2, TWO_NORMALS)
    try:
        with pytest.raises(ProtocolError, match="999"):
            Evaluator(problem).g(np.zeros(2))
    finally:
        problem.components[0].close()


def test_external_malformed_line(tmp_path):
    cmd = _child(tmp_path, """\
print("not json", flush=True)
""")
    problem = external_problem(cmd, 2, TWO_NORMALS)
    try:
        with pytest.raises(ProtocolError):
            Evaluator(problem).g(np.zeros(2))
    finally:
        problem.components[0].close()


def test_external_process_exit(tmp_path):
    cmd = _child(tmp_path, """\
sys.exit(3)
""")
    problem = external_problem(cmd, 2, TWO_NORMALS)
    try:
        with pytest.raises(EvaluationError):
            Evaluator(problem).g(np.zeros(2))
    finally:
        problem.components[0].close()


def test_external_nonfinite_value(tmp_path):
    cmd = _child(tmp_path, """\
print(json.dumps({"id": req["id"], "g": float("inf")}), flush=True)
""")
    problem = external_problem(cmd, 2, TWO_NORMALS)
    try:
        with pytest.raises(EvaluationError, match="non-finite"):
            Evaluator(problem).g(np.zeros(2))
    finally:
        problem.components[0].close()


def test_dim_mismatch_rejected(tmp_path):
    with pytest.raises(ConfigError):
        external_problem([sys.executable, "-c", "pass"], 3, TWO_NORMALS)
