"""SAT-backed Hitori assistant.

Solves a Hitori grid, verifies that the solution is unique, and stages the
solution into an ordered sequence of small proofs: unit-resolution proofs for
local deductions and connectivity "proofs by picture" for global ones.
"""

from .grid import CellRef, Grid, ShadingState, check_solution, parse_puzzle, render_state

__all__ = [
    "CellRef",
    "Grid",
    "ShadingState",
    "check_solution",
    "parse_puzzle",
    "render_state",
]
