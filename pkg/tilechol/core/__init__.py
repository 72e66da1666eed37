from .precision import Precision, cast_scalar, quantize, highest
from .tiles import (
    TileIndex,
    TileBuffer,
    TiledSymmetricMatrix,
    convert_tile,
    frobenius_norm_tile,
    frobenius_norm_matrix,
    lower_indices,
    tile_count,
)
from .dump import dump_matrix, load_matrix
