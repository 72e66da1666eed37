"""
JSONL schemas for the event trace and the transfer ledger. One event per
line, for example:

    {"kind": "GEMM", "row": 3, "col": 1, "dev": 0, "stream": 2,
     "t0": 0.0123, "t1": 0.0131, "prec": "FP32"}

    {"dir": "C2G", "row": 3, "col": 0, "bytes": 131072,
     "t0": 0.0101, "t1": 0.0102, "dev": 0}
"""
import json
from pathlib import Path
from typing import Iterable, List, Union

from marshmallow import Schema, fields, validate

from tilechol.constants import PRECISION_NAMES

EVENT_KINDS = ["POTRF", "TRSM", "SYRK", "GEMM", "C2G", "G2C"]


def _enum_value(value):
    return getattr(value, "value", value)


class TraceEventSchema(Schema):
    kind = fields.Function(lambda e: _enum_value(e.kind), deserialize=str, required=True,
                           validate=validate.OneOf(EVENT_KINDS))
    row = fields.Function(lambda e: e.tile.row, deserialize=int, required=True)
    col = fields.Function(lambda e: e.tile.col, deserialize=int, required=True)
    dev = fields.Integer(attribute="device", required=True)
    stream = fields.Integer(allow_none=True)
    t0 = fields.Float(attribute="t_start", required=True)
    t1 = fields.Float(attribute="t_end", required=True)
    prec = fields.Function(lambda e: _enum_value(e.precision), deserialize=str,
                           allow_none=True, validate=validate.OneOf(PRECISION_NAMES))


class TransferEventSchema(Schema):
    dir = fields.Function(lambda e: _enum_value(e.direction), deserialize=str, required=True,
                          validate=validate.OneOf(["C2G", "G2C"]))
    row = fields.Function(lambda e: e.tile.row, deserialize=int, required=True)
    col = fields.Function(lambda e: e.tile.col, deserialize=int, required=True)
    bytes = fields.Integer(required=True)
    t0 = fields.Float(attribute="t_start", required=True)
    t1 = fields.Float(attribute="t_end", required=True)
    dev = fields.Integer(attribute="device", required=True)


def write_jsonl(path: Union[str, Path], schema: Schema, events: Iterable) -> int:
    count = 0
    with open(path, "w") as f:
        for e in events:
            f.write(json.dumps(schema.dump(e), sort_keys=True))
            f.write("\n")
            count += 1
    return count


def read_jsonl(path: Union[str, Path], schema: Schema) -> List[dict]:
    with open(path) as f:
        return [schema.load(json.loads(line)) for line in f if line.strip()]
