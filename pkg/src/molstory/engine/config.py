"""Training configuration and its ``key=value`` text form."""
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-4
    batch_size: int = 32
    dropout: float = 0.3
    topk: int = 3
    provider: str = "topological"
    geometry_scale: float = 1.0
    freeze_geometry: bool = False
    seed: int = 0
    train_fraction: float = 0.7
    n_validation: int = 100
    d_f: int = 256
    d_a: int = 64
    heads: int = 8
    layers: int = 3
    ff: int = 512
    init_hidden: int = 512
    init_epochs: int = 300
    init_learning_rate: float = 1e-3
    max_atoms: int = 40
    max_steps: int = 0  # optimizer-step cap, 0 = no cap
    lr_schedule: str = "constant"  # or "cosine": decay to 0 over the planned steps

    def __post_init__(self):
        if self.topk < 1:
            raise ValueError("topk must be >= 1")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in (0, 1]")
        if self.n_validation < 0 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs, batch_size and n_validation must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    def replace(self, **changes):
        return replace(self, **changes)

    def to_text(self):
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text, **overrides):
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if not sep or key not in types:
                raise ValueError(f"config line {n}: unknown setting {key!r}")
            values[key] = _coerce(types[key], raw, key)
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_file(cls, path, **overrides):
        with open(path) as fh:
            return cls.from_text(fh.read(), **overrides)


def _coerce(kind, raw, key):
    kind = getattr(kind, "__name__", kind)
    try:
        if kind == "bool":
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError
            return raw.lower() in ("true", "1")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ValueError(f"config value for {key!r} is not a valid {kind}: {raw!r}") from None
