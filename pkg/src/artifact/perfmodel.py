"""Throughput model, baseline comparison and roofline bound.

One MAC counts as two operations throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .arith import PrecisionMode
from .errors import ConfigError
from .systolic import DEFAULT_K_CHUNK_WORDS, SaConfig, tiled_gemm_cost


@dataclass(frozen=True)
class ThroughputSpec:
    rows: int
    cols: int
    freq: float
    mode: PrecisionMode

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or not self.freq > 0:
            raise ValueError("throughput spec needs positive dimensions and frequency")


def theoretical_throughput(spec: ThroughputSpec) -> float:
    """Peak GOPS: every PE retires `lanes` MACs per cycle."""
    return spec.rows * spec.cols * spec.mode.lanes * 2 * spec.freq / 1e9


@dataclass
class CycleReport:
    setup_instructions: int = 0
    compute_instructions: int = 0
    setup_cycles: int = 0
    load_cycles: int = 0
    drain_cycles: int = 0
    stall_cycles: int = 0
    macs: int = 0
    freq: float | None = None
    comparisons: list[tuple[str, float]] = field(default_factory=list)

    @property
    def instructions(self) -> int:
        return self.setup_instructions + self.compute_instructions

    @property
    def compute_cycles(self) -> int:
        return self.load_cycles + self.drain_cycles + self.stall_cycles

    @property
    def total_cycles(self) -> int:
        return self.setup_cycles + self.compute_cycles

    @property
    def phases(self) -> dict[str, int]:
        return {
            "setup": self.setup_cycles,
            "load": self.load_cycles,
            "drain": self.drain_cycles,
            "stall": self.stall_cycles,
        }

    @property
    def gops(self) -> float | None:
        if not self.freq or not self.total_cycles:
            return None
        return 2 * self.macs / (self.total_cycles / self.freq) / 1e9

    def __add__(self, other: "CycleReport") -> "CycleReport":
        return CycleReport(
            self.setup_instructions + other.setup_instructions,
            self.compute_instructions + other.compute_instructions,
            self.setup_cycles + other.setup_cycles,
            self.load_cycles + other.load_cycles,
            self.drain_cycles + other.drain_cycles,
            self.stall_cycles + other.stall_cycles,
            self.macs + other.macs,
            self.freq if self.freq is not None else other.freq,
        )

    def as_dict(self) -> dict:
        d = {
            "instructions": self.instructions,
            "setup_instructions": self.setup_instructions,
            "compute_instructions": self.compute_instructions,
            "setup_cycles": self.setup_cycles,
            "load_cycles": self.load_cycles,
            "drain_cycles": self.drain_cycles,
            "stall_cycles": self.stall_cycles,
            "compute_cycles": self.compute_cycles,
            "total_cycles": self.total_cycles,
            "macs": self.macs,
        }
        if self.gops is not None:
            d["gops"] = round(self.gops, 4)
        for name, ratio in self.comparisons:
            d[f"speedup_vs_{name}"] = round(ratio, 4)
        return d


@dataclass(frozen=True)
class ScenarioCounts:
    setup_instructions: int
    setup_cycles: int
    compute_instructions: int
    compute_cycles: int

    @property
    def instructions(self) -> int:
        return self.setup_instructions + self.compute_instructions

    @property
    def total_cycles(self) -> int:
        return self.setup_cycles + self.compute_cycles


@dataclass(frozen=True)
class BaselineModel:
    key: str
    name: str
    scenarios: dict[str, ScenarioCounts]
    peak_gops: dict[PrecisionMode, float]

    def scenario(self, name: str) -> ScenarioCounts:
        try:
            return self.scenarios[name]
        except KeyError:
            raise ConfigError(f"baseline {self.name} has no scenario {name!r}") from None

    def peak(self, mode: PrecisionMode) -> float:
        try:
            return self.peak_gops[mode]
        except KeyError:
            raise ConfigError(f"baseline {self.name} has no {mode} peak throughput") from None


_SCENARIO_FIELDS = {f for f in ScenarioCounts.__dataclass_fields__}


def parse_baselines(text: str) -> dict[str, BaselineModel]:
    """Parse ``key = value`` baseline configuration text."""
    raw: dict[str, dict] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        parts = key.split(".")
        entry = raw.setdefault(parts[0], {"name": parts[0], "scenarios": {}, "peak": {}})
        if parts[1:] == ["name"]:
            entry["name"] = value
        elif len(parts) == 3 and parts[1] == "peak_gops":
            entry["peak"][PrecisionMode.parse(parts[2])] = float(value)
        elif len(parts) == 3 and parts[2] in _SCENARIO_FIELDS:
            entry["scenarios"].setdefault(parts[1], {})[parts[2]] = int(value)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    out = {}
    for k, e in raw.items():
        scenarios = {}
        for s, fields in e["scenarios"].items():
            missing = _SCENARIO_FIELDS - fields.keys()
            if missing:
                raise ConfigError(f"{k}.{s} is missing {', '.join(sorted(missing))}")
            scenarios[s] = ScenarioCounts(**fields)
        out[k] = BaselineModel(k, e["name"], scenarios, e["peak"])
    return out


def load_baselines(path=None) -> dict[str, BaselineModel]:
    if path is None:
        text = resources.files("artifact").joinpath("data/baselines.cfg").read_text()
    else:
        text = Path(path).read_text()
    return parse_baselines(text)


def compare_to_baseline(report: CycleReport, baseline: BaselineModel, scenario: str) -> float:
    """Speedup for equal work: baseline cycles over our cycles."""
    counts = baseline.scenario(scenario)
    return counts.total_cycles / report.total_cycles


def compare_peak(spec: ThroughputSpec, baseline: BaselineModel) -> float:
    return theoretical_throughput(spec) / baseline.peak(spec.mode)


def roofline_cycles(gemm, spec: ThroughputSpec, bus_words_per_cycle: float,
                    k_chunk_words: int | None = DEFAULT_K_CHUNK_WORDS) -> int:
    """max(array compute cycles, bus cycles for operand and result words)."""
    if not bus_words_per_cycle > 0:
        raise ValueError("bus bandwidth must be positive")
    cfg = SaConfig(spec.rows, spec.cols, gemm.mode, k_chunk_words)
    cost = tiled_gemm_cost(gemm.M, gemm.K, gemm.N, cfg)
    return max(cost.compute, memory_cycles(cost.traffic_words, bus_words_per_cycle))


def memory_cycles(words: int, bus_words_per_cycle: float) -> int:
    if math.isinf(bus_words_per_cycle):
        return 0
    return math.ceil(words / bus_words_per_cycle)
