"""CPLEX LP text export of a MilpProblem."""

import logging
import re
from pathlib import Path

import numpy as np

from lvrt_pinn.milp.problem import MilpProblem

logger = logging.getLogger(__name__)

MAX_NAME_LENGTH = 255
PRECISION = ".17g"

_ILLEGAL = re.compile(r"[^A-Za-z0-9_.]")


def _no_negative_zero(value: float) -> float:
    return value + 0.0


def _sanitize(names: list[str], kind: str) -> list[str]:
    """Map names onto legal, unique LP identifiers.

    Illegal characters become ``_``; names starting with a digit or a period
    get a leading ``_``; long names are truncated. Collisions created by the
    rewrite receive an ``_<n>`` suffix, n counting up from the position
    until the name is unused.
    """
    result = []
    seen: set[str] = set()
    changed = 0
    for pos, name in enumerate(names):
        clean = _ILLEGAL.sub("_", name) or "_"
        if clean[0].isdigit() or clean[0] == ".":
            clean = "_" + clean
        clean = clean[:MAX_NAME_LENGTH]
        base, n = clean, pos
        while clean in seen:
            suffix = f"_{n}"
            clean = base[: MAX_NAME_LENGTH - len(suffix)] + suffix
            n += 1
        if clean != name:
            changed += 1
        seen.add(clean)
        result.append(clean)
    if changed:
        logger.warning(f"Renamed {changed} {kind} name(s) to legal LP identifiers")
    return result


def _terms(coefficients: dict[int, float], names: list[str]) -> list[str]:
    if not coefficients:
        # LP rows and objectives need at least one term
        return [f"{0.0:+{PRECISION}} {names[0]}\n"]
    return [
        f"{_no_negative_zero(c):+{PRECISION}} {names[i]}\n" for i, c in sorted(coefficients.items())
    ]


def format_lp(problem: MilpProblem) -> str:
    """Render the problem in CPLEX LP format.

    Every variable gets an explicit line in the ``Bounds`` section because the
    format's default lower bound is 0: fixed variables as ``x = v``, free
    sides as ``-inf``/``+inf``.
    """
    if not problem.n_vars:
        raise ValueError("Cannot export a problem without variables")
    var_names = _sanitize([v.name for v in problem.variables], "variable")
    row_names = _sanitize([c.name for c in problem.constraints], "constraint")

    out = ["\\* lvrt-pinn MILP *\\\n\n"]
    out.append("Maximize\n" if problem.maximize else "Minimize\n")
    out.append("obj:\n")
    out.extend(_terms(problem.objective, var_names))
    out.append("\nSubject To\n\n")
    for name, con in zip(row_names, problem.constraints, strict=True):
        out.append(f"{name}:\n")
        out.extend(_terms(con.coefficients, var_names))
        out.append(f"{con.sense} {_no_negative_zero(con.rhs):{PRECISION}}\n\n")

    out.append("Bounds\n")
    for name, var in zip(var_names, problem.variables, strict=True):
        lo, hi = var.lower, var.upper
        if lo == hi:
            out.append(f"   {name} = {_no_negative_zero(lo):{PRECISION}}\n")
            continue
        left = " -inf" if np.isneginf(lo) else f"{_no_negative_zero(lo):{PRECISION}}"
        right = "+inf" if np.isposinf(hi) else f"{_no_negative_zero(hi):{PRECISION}}"
        out.append(f"   {left} <= {name} <= {right}\n")

    binaries = [var_names[i] for i in problem.binary_indices]
    if binaries:
        out.append("Binary\n")
        out.extend(f"  {name}\n" for name in binaries)
    out.append("End\n")
    return "".join(out)


def export_lp_file(problem: MilpProblem, path: Path | str) -> None:
    """Write ``format_lp(problem)`` to ``path``.

    Raises:
        OSError: If the file cannot be written
    """
    path = Path(path)
    path.write_text(format_lp(problem))
    logger.info(
        f"Wrote LP file {path} ({problem.n_vars} variables, {problem.n_rows} rows)",
        extra={"pipeline_event": "export_lp"},
    )
