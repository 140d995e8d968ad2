"""JSON report written by ``manage.py adamant test``."""
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .exceptions import InvalidConfigError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PairResult:
    lambda_x: str
    lambda_y: str
    statistic: float
    p_value: float
    rv: float = None

    @property
    def label(self):
        return f"{self.lambda_x}/{self.lambda_y}"


@dataclass(frozen=True)
class TestReport:
    config: dict
    n: int
    p: int
    q: int
    seed: int
    permutations: int
    pairs: tuple
    adaptive_p: float
    selected_pair: int
    runtime_ms: float = 0.0
    n_jobs: int = 1
    literal_formula: bool = False
    schema_version: int = SCHEMA_VERSION
    notes: tuple = field(default=())

    def __post_init__(self):
        pairs = tuple(pair if isinstance(pair, PairResult) else PairResult(**pair) for pair in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def selected(self):
        return self.pairs[self.selected_pair]

    def to_dict(self):
        data = asdict(self)
        data["pairs"] = [asdict(pair) for pair in self.pairs]
        data["notes"] = list(self.notes)
        return data

    @classmethod
    def from_dict(cls, data):
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise InvalidConfigError(f"unsupported report schema version {version!r}")
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def write(self, path):
        path = Path(path)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    @classmethod
    def read(cls, path):
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def comparable(self):
        """Copy with the timing and thread-count fields zeroed, for reproducibility checks."""
        return replace(self, runtime_ms=0.0, n_jobs=1)
