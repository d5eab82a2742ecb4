"""Multi-precision output-stationary systolic array simulator."""

from .arith import PrecisionMode
from .errors import SimError
from .isa import execute, parse_program
from .mem import Memory, pack, unpack
from .perfmodel import CycleReport, ThroughputSpec, theoretical_throughput
from .systolic import SaConfig, sa_matmul
from .workload import LayerSpec, lower_layer, simulate_network, tile

__version__ = "0.1.0"
