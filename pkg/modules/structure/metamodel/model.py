"""
The structural tuple theta = (r, H, Pi, L, E, M), its canonical binary
encoding and the description length |theta| derived from it.

Encoding: every value is a one-byte type tag followed by a fixed-width or
length-prefixed body (big-endian). Mappings keep field order as produced by
to_dict, which follows the type definitions; data tables are sorted there.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from lib.errors import ConfigError
from modules.structure.memory import MemorySpec
from modules.structure.regimes import DEFAULT_CONTEXT, EvaluatorFamily

from .environments import EnvironmentFamily
from .representation import RepresentationSpec

log = logging.getLogger("smgi.metamodel")

CLASS_KINDS = ("finite_enumerated", "parametric_grid")
PRIOR_KINDS = ("uniform", "weights")


@dataclass(frozen=True)
class HypothesisClassSpec:
    kind: str = "finite_enumerated"
    members: tuple[str, ...] = ()
    complexity_bits: Optional[float] = None
    cardinality: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in CLASS_KINDS:
            raise ValueError(f"hypothesis class kind must be one of {CLASS_KINDS}")
        members = tuple(str(h) for h in self.members)
        if len(set(members)) != len(members):
            raise ValueError("hypothesis identifiers must be unique")
        object.__setattr__(self, "members", members)
        if self.kind == "finite_enumerated":
            if not members:
                raise ValueError("a finite_enumerated class needs at least one member")
            bits = math.log2(len(members))
            if self.complexity_bits is not None and abs(self.complexity_bits - bits) > 1e-12:
                raise ValueError(f"complexity_bits must equal log2(cardinality) = {bits}")
            object.__setattr__(self, "complexity_bits", bits)
            object.__setattr__(self, "cardinality", len(members))
        else:
            if self.cardinality is None and self.complexity_bits is None:
                raise ValueError("a parametric_grid class declares cardinality or complexity_bits")
            if self.cardinality is not None and self.cardinality < 1:
                raise ValueError("cardinality must be positive")
            if self.complexity_bits is None:
                object.__setattr__(self, "complexity_bits", math.log2(self.cardinality))
            if self.complexity_bits < 0:
                raise ValueError("complexity_bits must be nonnegative")

    @classmethod
    def enumerated(cls, members) -> "HypothesisClassSpec":
        return cls("finite_enumerated", tuple(members))

    @classmethod
    def grid(cls, complexity_bits: float) -> "HypothesisClassSpec":
        """Parametric class with 2**complexity_bits members (only its size is declared)."""
        n = int(2 ** complexity_bits) if complexity_bits < 63 else None
        return cls("parametric_grid", (), float(complexity_bits), n)

    def resolves(self, h: str) -> bool:
        return self.kind != "finite_enumerated" or h in self.members

    def to_dict(self) -> dict:
        return {"kind": self.kind, "members": list(self.members),
                "complexity_bits": float(self.complexity_bits), "cardinality": self.cardinality}

    @classmethod
    def from_dict(cls, data: dict) -> "HypothesisClassSpec":
        kind = data.get("kind", "finite_enumerated")
        card = data.get("cardinality")
        bits = data.get("complexity_bits")
        if kind == "finite_enumerated":
            return cls(kind, tuple(data.get("members", ())))
        return cls(kind, tuple(data.get("members", ())), float(bits) if bits is not None else None,
                   int(card) if card is not None else None)


@dataclass(frozen=True)
class PriorSpec:
    kind: str = "uniform"
    weights: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"prior kind must be one of {PRIOR_KINDS}")
        if self.kind == "weights":
            w = {str(h): float(p) for h, p in sorted(self.weights.items())}
            if any(p < 0 for p in w.values()) or abs(sum(w.values()) - 1.0) > 1e-12:
                raise ValueError("prior weights must form a distribution")
            object.__setattr__(self, "weights", w)

    def probabilities(self, hc: HypothesisClassSpec) -> dict[str, float]:
        if self.kind == "weights":
            return dict(self.weights)
        if not hc.members:
            raise ValueError("a uniform prior over an unenumerated class has no explicit form")
        return {h: 1.0 / len(hc.members) for h in hc.members}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": dict(self.weights)}

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "PriorSpec":
        data = data or {}
        return cls(data.get("kind", "uniform"), dict(data.get("weights") or {}))


@dataclass(frozen=True)
class MetaModel:
    representation: RepresentationSpec
    hypothesis_class: HypothesisClassSpec
    prior: PriorSpec
    evaluators: EvaluatorFamily
    environments: EnvironmentFamily
    memory: MemorySpec = field(default_factory=MemorySpec)

    def __post_init__(self) -> None:
        hc = self.hypothesis_class
        labels = {lab for e in self.environments.instances for lab in e.labels} | {DEFAULT_CONTEXT}
        for ev in self.evaluators.evaluators:
            for h, row in ev.losses.items():
                if not hc.resolves(h):
                    raise ValueError(f"evaluator {ev.name!r} references unknown hypothesis {h!r}")
                stray = [z for z in row if z not in labels]
                if stray:
                    raise ValueError(f"evaluator {ev.name!r} references observations {stray[:3]} outside Z")
        if self.prior.kind == "weights":
            unknown = [h for h in self.prior.weights if not hc.resolves(h)]
            if unknown:
                raise ValueError(f"prior puts mass on unknown hypotheses {unknown[:3]}")
        risks = self.environments.regime_risks
        if risks and hc.members and any(len(r) != len(hc.members) for r in risks.values()):
            raise ValueError("regime risk rows must have one entry per hypothesis")

    @property
    def description_bits(self) -> int:
        return description_length_bits(self)

    def to_dict(self) -> dict:
        return {
            "representation": self.representation.to_dict(),
            "hypothesis_class": self.hypothesis_class.to_dict(),
            "prior": self.prior.to_dict(),
            "evaluators": self.evaluators.to_dict(),
            "environments": self.environments.to_dict(),
            "memory": self.memory.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetaModel":
        return cls(
            representation=RepresentationSpec.from_dict(data.get("representation") or {}),
            hypothesis_class=HypothesisClassSpec.from_dict(data["hypothesis_class"]),
            prior=PriorSpec.from_dict(data.get("prior")),
            evaluators=EvaluatorFamily.from_dict(data["evaluators"]),
            environments=EnvironmentFamily.from_dict(data["environments"]),
            memory=MemorySpec.from_dict(data.get("memory")),
        )


# --- canonical encoding -----------------------------------------------------

_TAG_NONE, _TAG_FALSE, _TAG_TRUE = b"N", b"F", b"T"
_TAG_INT, _TAG_FLOAT, _TAG_STR = b"I", b"D", b"S"
_TAG_LIST, _TAG_MAP = b"L", b"M"


def _encode(value: Any, out: bytearray) -> None:
    if value is None:
        out += _TAG_NONE
    elif isinstance(value, bool):
        out += _TAG_TRUE if value else _TAG_FALSE
    elif isinstance(value, int):
        out += _TAG_INT + struct.pack(">q", value)
    elif isinstance(value, float):
        out += _TAG_FLOAT + struct.pack(">d", value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out += _TAG_STR + struct.pack(">I", len(raw)) + raw
    elif isinstance(value, (list, tuple)):
        out += _TAG_LIST + struct.pack(">I", len(value))
        for v in value:
            _encode(v, out)
    elif isinstance(value, dict):
        out += _TAG_MAP + struct.pack(">I", len(value))
        for k, v in value.items():
            _encode(str(k), out)
            _encode(v, out)
    else:
        raise TypeError(f"cannot encode value of type {type(value).__name__}")


def _decode(buf: bytes, pos: int) -> tuple[Any, int]:
    tag = buf[pos:pos + 1]
    pos += 1
    if tag == _TAG_NONE:
        return None, pos
    if tag in (_TAG_TRUE, _TAG_FALSE):
        return tag == _TAG_TRUE, pos
    if tag == _TAG_INT:
        return struct.unpack_from(">q", buf, pos)[0], pos + 8
    if tag == _TAG_FLOAT:
        return struct.unpack_from(">d", buf, pos)[0], pos + 8
    if tag == _TAG_STR:
        (n,) = struct.unpack_from(">I", buf, pos)
        pos += 4
        return buf[pos:pos + n].decode("utf-8"), pos + n
    if tag == _TAG_LIST:
        (n,) = struct.unpack_from(">I", buf, pos)
        pos += 4
        items = []
        for _ in range(n):
            v, pos = _decode(buf, pos)
            items.append(v)
        return items, pos
    if tag == _TAG_MAP:
        (n,) = struct.unpack_from(">I", buf, pos)
        pos += 4
        d = {}
        for _ in range(n):
            k, pos = _decode(buf, pos)
            d[k], pos = _decode(buf, pos)
        return d, pos
    raise ValueError(f"bad type tag {tag!r} at offset {pos - 1}")


def encode_value(value: Any) -> bytes:
    out = bytearray()
    _encode(value, out)
    return bytes(out)


def decode_value(data: bytes) -> Any:
    value, pos = _decode(data, 0)
    if pos != len(data):
        raise ValueError(f"{len(data) - pos} trailing bytes after canonical value")
    return value


def serialize_metamodel(m: MetaModel) -> bytes:
    """Canonical, deterministic byte encoding of theta."""
    return encode_value(m.to_dict())


def deserialize_metamodel(data: bytes) -> MetaModel:
    return MetaModel.from_dict(decode_value(data))


def description_length_bits(m: MetaModel) -> int:
    """|theta| = 8 x byte length of the canonical encoding."""
    return 8 * len(serialize_metamodel(m))


def load_metamodel(source: Union[str, Path, dict]) -> MetaModel:
    """Build a MetaModel from a JSON document path or an already-parsed dict."""
    path = ""
    if isinstance(source, dict):
        data = source
    else:
        path = str(source)
        try:
            with open(source, "r", encoding="utf-8") as f:
                data = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read model: {e}", path=path) from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON at line {e.lineno}", path=path) from e
    try:
        return MetaModel.from_dict(data)
    except KeyError as e:
        raise ConfigError("missing field", path=path, field=str(e.args[0])) from e
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), path=path) from e
