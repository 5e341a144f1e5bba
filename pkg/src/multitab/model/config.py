from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

from ..errors import ConfigError


class MaskScheme(str, enum.Enum):
    NONE = "none"
    F_NOT_T = "FnotT"     # feature queries may not read task keys
    T_NOT_T = "TnotT"     # task queries may not read other task keys
    BOTH = "Both"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"none": cls.NONE, "no": cls.NONE, "fnott": cls.F_NOT_T, "tnott": cls.T_NOT_T,
                   "both": cls.BOTH}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ConfigError(f"unknown mask scheme {value!r}", "/model/mask") from None


@dataclass
class ModelConfig:
    e: int = 16
    heads: int = 4
    blocks: int = 2
    ffn_hidden: int = 0              # 0 -> 2e
    mask: MaskScheme = MaskScheme.T_NOT_T
    use_rope: bool = False
    inter_sample: bool = True        # False drops the inter-sample branch (diagnostic)
    single_token: bool = False       # one shared task token read by every head
    dropout_attention: float = 0.0
    dropout_ffn: float = 0.0
    head_hidden: int = 16
    ln_eps: float = 1e-5
    rope_base: float = 10_000.0
    token_init_std: float = 0.02

    def __post_init__(self):
        self.mask = MaskScheme.parse(self.mask)
        if self.ffn_hidden <= 0:
            self.ffn_hidden = 2 * self.e
        for name in ("e", "heads", "blocks", "ffn_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1", f"/model/{name}")
        if self.e % self.heads:
            raise ConfigError(f"heads={self.heads} must divide e={self.e}", "/model/heads")
        if self.head_hidden < 0:
            raise ConfigError("head_hidden must be >= 0", "/model/head_hidden")

    def check_tokens(self, d, t):
        if self.inter_sample and ((d + t) * self.e) % self.heads:
            raise ConfigError(
                f"heads={self.heads} must divide the flattened sample width {(d + t) * self.e}", "/model/heads")

    def to_json(self):
        out = asdict(self)
        out["mask"] = self.mask.value
        return out

    @classmethod
    def from_json(cls, item):
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in item.items() if k in known})


@dataclass
class MLPConfig:
    variant: str = "STL"             # "STL" | "SharedBottom"
    e: int = 16
    trunk: list = field(default_factory=lambda: [64, 32])
    head_hidden: list = field(default_factory=list)

    def __post_init__(self):
        if self.variant not in ("STL", "SharedBottom"):
            raise ConfigError(f"unknown MLP variant {self.variant!r}", "/model/variant")
        if self.e < 1 or any(w < 1 for w in list(self.trunk) + list(self.head_hidden)):
            raise ConfigError("MLP widths must be >= 1", "/model")

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, item):
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in item.items() if k in known})
