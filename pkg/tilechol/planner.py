"""
Adaptive tile precision planning.

An off-diagonal tile gets the least precise format p from the allowed menu
for which

    Nt * ||A_ij||_F / ||A||_F < eps_target / u_p

holds, u_p being the unit roundoff of p. Diagonal tiles, and tiles for which
no format qualifies, get the most precise allowed format.
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from pydantic import BaseModel, ValidationError, conint, root_validator, validator

from tilechol.constants import PRECISION_MODES
from tilechol.core import (
    Precision,
    TileIndex,
    TiledSymmetricMatrix,
    convert_tile,
    frobenius_norm_matrix,
    highest,
    lower_indices,
)
from tilechol.exceptions import MalformedInput, ZeroMatrix

logger = logging.getLogger(__name__)


def allowed_precisions(mode: str) -> List[Precision]:
    """Precision menu for a precision mode (fp64, 2p, 3p, 4p)"""
    try:
        return [Precision(name) for name in PRECISION_MODES[mode]]
    except KeyError:
        raise ValueError(f"unknown precision mode {mode}, use one of {list(PRECISION_MODES)}")


class TileAssignment(BaseModel):
    row: conint(ge=0)
    col: conint(ge=0)
    prec: Precision

    @validator("col")
    def validate_lower(cls, value, values):
        if "row" in values and value > values["row"]:
            raise ValueError("only lower-triangular tiles can be assigned")
        return value


class PrecisionMapExport(BaseModel):
    """JSON form of a precision map"""

    Nt: conint(ge=1)
    eps_target: Optional[float]
    tiles: List[TileAssignment]

    class Config:
        extra = "forbid"

    @root_validator(skip_on_failure=True)
    def validate_coverage(cls, values):
        nt = values["Nt"]
        seen = set()
        for t in values["tiles"]:
            key = (t.row, t.col)
            if t.row >= nt:
                raise ValueError(f"tile {key} outside a {nt}x{nt} grid")
            if key in seen:
                raise ValueError(f"tile {key} assigned twice")
            seen.add(key)
        if len(seen) != nt * (nt + 1) // 2:
            raise ValueError("every lower-triangular tile needs exactly one assignment")
        return values


class PrecisionMap:
    def __init__(self, nt: int, assignment: Dict[TileIndex, Precision],
                 epsilon_target: Optional[float], allowed: Iterable[Precision]):
        self.nt = nt
        self.assignment = dict(assignment)
        self.epsilon_target = epsilon_target
        self.allowed = sorted(set(allowed), reverse=True)

        expected = set(lower_indices(nt))
        if set(self.assignment) != expected:
            raise ValueError("precision map must cover every lower-triangular tile exactly once")
        top = self.allowed[0]
        for idx in expected:
            if idx.is_diagonal and self.assignment[idx] is not top:
                raise ValueError(f"diagonal tile {idx} must use {top}")

    def __getitem__(self, idx: TileIndex) -> Precision:
        return self.assignment[idx]

    def __eq__(self, other):
        if not isinstance(other, PrecisionMap):
            return NotImplemented
        return self.nt == other.nt and self.assignment == other.assignment

    @property
    def highest(self) -> Precision:
        return self.allowed[0]

    def counts(self) -> Dict[str, int]:
        """Tiles per allowed precision, keyed by precision name"""
        out = {p.value: 0 for p in self.allowed}
        for p in self.assignment.values():
            out[p.value] = out.get(p.value, 0) + 1
        return out

    def export(self) -> PrecisionMapExport:
        tiles = [
            TileAssignment(row=idx.row, col=idx.col, prec=self.assignment[idx])
            for idx in lower_indices(self.nt)
        ]
        return PrecisionMapExport(Nt=self.nt, eps_target=self.epsilon_target, tiles=tiles)

    def to_json(self) -> str:
        return self.export().json()

    @classmethod
    def from_export(cls, data: PrecisionMapExport) -> "PrecisionMap":
        assignment = {TileIndex(t.row, t.col): t.prec for t in data.tiles}
        return cls(data.Nt, assignment, data.eps_target, set(assignment.values()))


def load_precision_map(path: Union[str, Path]) -> PrecisionMap:
    try:
        data = PrecisionMapExport.parse_file(path)
    except (ValidationError, ValueError) as e:
        raise MalformedInput(f"{path}: {e}", reason="invalid precision map") from e
    try:
        return PrecisionMap.from_export(data)
    except ValueError as e:
        raise MalformedInput(f"{path}: {e}", reason="invalid precision map") from e


def uniform_map(nt: int, p: Precision) -> PrecisionMap:
    return PrecisionMap(nt, {idx: p for idx in lower_indices(nt)}, None, [p])


def plan_precisions(A: TiledSymmetricMatrix, eps_target: float,
                    allowed: Iterable[Precision]) -> PrecisionMap:
    allowed = sorted(set(allowed))
    if not allowed:
        raise ValueError("allowed precision set is empty")
    if not 0.0 < eps_target < 1.0:
        raise ValueError(f"eps_target {eps_target} outside (0, 1)")

    norm = frobenius_norm_matrix(A)
    if norm == 0.0:
        raise ZeroMatrix("cannot plan precisions for a zero matrix")

    top = highest(allowed)
    assignment = {}
    for idx in A.indices():
        if idx.is_diagonal:
            assignment[idx] = top
            continue
        ratio = A.nt * A.logical_norm(idx) / norm
        assignment[idx] = top
        # least precise first
        for p in allowed:
            if ratio < eps_target / p.unit_roundoff:
                assignment[idx] = p
                break

    pmap = PrecisionMap(A.nt, assignment, eps_target, allowed)
    logger.info("planned precisions eps_target=%g: %s", eps_target, pmap.counts())
    return pmap


def apply_precision_map(A: TiledSymmetricMatrix, m: PrecisionMap) -> TiledSymmetricMatrix:
    """Convert every tile to its assigned precision."""
    if m.nt != A.nt:
        raise ValueError(f"precision map for Nt={m.nt} does not cover {A}")
    tiles = {idx: convert_tile(A[idx], m[idx]) for idx in A.indices()}
    return TiledSymmetricMatrix(A.n, A.nb, tiles)
