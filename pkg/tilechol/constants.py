PRECISION_NAMES = ["FP64", "FP32", "FP16", "FP8E4M3"]

UNIT_ROUNDOFF = {
    "FP64": 2.0**-53,
    "FP32": 2.0**-24,
    "FP16": 2.0**-11,
    "FP8E4M3": 2.0**-4,
}

BYTES_PER_ELEMENT = {
    "FP64": 8,
    "FP32": 4,
    "FP16": 2,
    "FP8E4M3": 1,
}

# Codes used by the binary tile dump
PRECISION_CODES = {
    "FP64": 0,
    "FP32": 1,
    "FP16": 2,
    "FP8E4M3": 3,
}

FP8_E4M3_MAX = 448.0

PRECISION_MODES = {
    "fp64": ["FP64"],
    "2p": ["FP64", "FP32"],
    "3p": ["FP64", "FP32", "FP16"],
    "4p": ["FP64", "FP32", "FP16", "FP8E4M3"],
}

# (sigma_sq, range_a, smoothness_nu)
CORRELATION_PRESETS = {
    "weak": (1.0, 0.02627, 0.5),
    "medium": (1.0, 0.078809, 0.5),
    "strong": (1.0, 0.210158, 0.5),
}

SUPPORTED_SMOOTHNESS = [0.5, 1.5, 2.5]

# bytes_per_second, latency_seconds
BANDWIDTH_PRESETS = {
    "nvlink-c2c": (900e9, 10e-6),
    "nvlink-remote": (100e9, 10e-6),
    "pcie": (64e9, 10e-6),
}

DEFAULT_WATCHDOG_SECONDS = 600.0

# Tiles that must be device resident at once for one stream:
# accumulator, two operands and the diagonal tile
WORKING_SET_TILES = 4

LOG_LEVEL_ENV = "TILECHOL_LOG_LEVEL"
