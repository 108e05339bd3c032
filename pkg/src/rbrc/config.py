"""Run configuration and its flat ``key=value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from .yuv_io import ConfigurationError, VideoSpec

MODES = ("t1", "t2", "fl", "mbl", "cqp")


@dataclass
class RunConfig:
    input: str = ""
    width: int = 176
    height: int = 144
    fps: float = 15.0
    frames: int = 0
    frame_skip: int = 0
    mode: str = "t2"
    bitrate: float = 32000.0
    buffer_ratio: float = 0.5
    mu: float = 0.5
    alpha: float = 0.85
    th1: float = 0.75
    th2: float = 0.5
    gmv_search_range: int = 16
    no_gmc: bool = False
    no_lambda_adjust: bool = False
    model_window: int = 20
    me_range: int = 16
    qp: int = 32
    output: str = "out"
    dump_regions: bool = False
    dump_recon: bool = False
    dump_models: bool = False
    modes: list = field(default_factory=list)

    def __post_init__(self):
        self.mode = self.mode.lower()
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.bitrate <= 0:
            raise ConfigurationError("bitrate must be > 0")
        if self.buffer_ratio <= 0:
            raise ConfigurationError("buffer_ratio must be > 0")
        if not 0 <= self.mu <= 1:
            raise ConfigurationError("mu must lie in [0, 1]")
        if self.alpha <= 0 or self.th1 <= 0 or self.th2 <= 0:
            raise ConfigurationError("alpha, th1 and th2 must be > 0")
        if self.frame_skip < 0 or self.frames < 0:
            raise ConfigurationError("frames and frame_skip must be >= 0")
        if self.model_window < 1 or self.me_range < 0 or self.gmv_search_range < 0:
            raise ConfigurationError("model_window must be >= 1, search ranges >= 0")
        if not 0 <= self.qp <= 51:
            raise ConfigurationError("qp must lie in [0, 51]")
        self.modes = [m.lower() for m in self.modes]
        for m in self.modes:
            if m not in MODES:
                raise ConfigurationError(f"unknown mode {m!r}")
        self.video  # validates geometry

    @property
    def video(self) -> VideoSpec:
        return VideoSpec(self.width, self.height, self.fps, self.frames)

    @property
    def coded_frame_rate(self) -> float:
        return self.fps / (self.frame_skip + 1)

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigurationError(f"line {n}: expected key=value, got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigurationError(f"line {n}: unknown key {key!r}")
            kw[key] = _parse(types[key], val, n)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def _parse(typ: str, val: str, line: int):
    try:
        if typ == "bool":
            low = val.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return low in ("true", "1", "yes")
        if typ == "int":
            return int(val)
        if typ == "float":
            return float(val)
        if typ == "list":
            return [v.strip() for v in val.split(",") if v.strip()]
        return val
    except ValueError:
        raise ConfigurationError(f"line {line}: bad {typ} value {val!r}") from None
