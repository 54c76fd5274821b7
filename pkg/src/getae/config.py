"""Run configuration: built-in defaults < INI file < command-line overrides.

The INI file has one section per subsystem::

    [run]        seed, workers, output
    [word2vec]   dim, window, min_count, learning_rate, epochs, ...
    [node2vec]   dim, window, walk_length, walks_per_node, p, q, ...
    [deepwalk]   same keys as node2vec
    [model]      bidirection, recurrent, we_model, ne_model, hidden_units, ...
    [optimizer]  kind, learning_rate, beta1, beta2, epsilon
    [eval]       kind (kfold | holdout), k, test_fraction
    [sequences]  <source name> = <path to pretrained sequence file>
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
import types
import typing
from dataclasses import dataclass, field, replace
from pathlib import Path

from .evaluation import EvalProtocol
from .model import GetaeConfig, NodeModel
from .pipeline import DEEPWALK_DEFAULTS, NODE2VEC_DEFAULTS, NodeEmbeddingParams, Word2VecParams

SECTIONS = ("run", "word2vec", "node2vec", "deepwalk", "model", "optimizer", "eval", "sequences")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunSettings:
    seed: int = 0
    workers: int = 1
    output: str = "results"


@dataclass(frozen=True)
class RunConfig:
    run: RunSettings = RunSettings()
    word2vec: Word2VecParams = Word2VecParams()
    node2vec: NodeEmbeddingParams = NODE2VEC_DEFAULTS
    deepwalk: NodeEmbeddingParams = DEEPWALK_DEFAULTS
    model: GetaeConfig = GetaeConfig()
    eval: EvalProtocol = EvalProtocol()
    sequences: dict[str, str] = field(default_factory=dict)

    def node_defaults(self) -> dict[NodeModel, NodeEmbeddingParams]:
        return {NodeModel.NODE2VEC: self.node2vec, NodeModel.DEEPWALK: self.deepwalk}

    def section(self, name: str):
        if name == "optimizer":
            return self.model.optimizer
        return getattr(self, name)

    def with_values(self, section: str, values: dict[str, str]) -> "RunConfig":
        """Apply string-valued overrides to one section."""
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if section == "sequences":
            return replace(self, sequences={**self.sequences, **values})
        target = self.section(section)
        updated = _coerce_into(target, values, section)
        if section == "optimizer":
            return replace(self, model=replace(self.model, optimizer=updated))
        if section == "eval":
            updated = replace(updated, seed=self.run.seed)
        return replace(self, **{section: updated})


_SKIP = {"kind", "optimizer"}  # node kind is fixed per section; optimizer has its own


def _field_type(obj, name):
    hints = typing.get_type_hints(type(obj))
    return hints[name]


def _parse_value(raw: str, tp, where: str):
    raw = raw.strip()
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if raw.lower() in ("none", "null", ""):
            return None
        return _parse_value(raw, args[0], where)
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(tp, type) and issubclass(tp, enum.Enum):
            for member in tp:
                if member.value.lower() == raw.lower() or member.name.lower() == raw.lower():
                    return member
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {getattr(tp, '__name__', tp)}") from None


def _coerce_into(obj, values: dict[str, str], section: str):
    names = {f.name for f in dataclasses.fields(obj)}
    changes = {}
    for key, raw in values.items():
        if key not in names or (key in _SKIP and section in ("node2vec", "deepwalk", "model")):
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        changes[key] = _parse_value(raw, _field_type(obj, key), f"[{section}] {key}")
    try:
        return replace(obj, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Defaults, then the INI file at ``path``, then ``section.key=value`` overrides."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        read = parser.read(path, encoding="utf-8")
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            cfg = cfg.with_values(section, dict(parser.items(section)))
    for item in overrides or []:
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        cfg = cfg.with_values(section.strip(), {name.strip(): value})
    return replace(cfg, eval=replace(cfg.eval, seed=cfg.run.seed))


def describe_defaults() -> str:
    """Default values of every section, with the published value where one exists."""
    published = {
        ("word2vec", "window"): "10", ("word2vec", "min_count"): "4",
        ("word2vec", "learning_rate"): "0.025", ("word2vec", "epochs"): "5",
        ("node2vec", "window"): "10", ("node2vec", "min_count"): "1", ("node2vec", "walk_length"): "10",
        ("node2vec", "learning_rate"): "0.05", ("node2vec", "epochs"): "1",
        ("node2vec", "p"): "1", ("node2vec", "q"): "1", ("node2vec", "dim"): "100",
        ("deepwalk", "window"): "5", ("deepwalk", "min_count"): "1", ("deepwalk", "walk_length"): "10",
        ("deepwalk", "learning_rate"): "0.05", ("deepwalk", "epochs"): "1", ("deepwalk", "dim"): "100",
        ("model", "hidden_units"): "64 (128 bidirectional)", ("model", "dropout"): "0.2",
        ("model", "graph_dense"): "32", ("model", "text_dense"): "32",
        ("model", "epochs"): "30 (8 with Word2Vec)", ("optimizer", "learning_rate"): "0.001",
        ("eval", "k"): "10", ("eval", "test_fraction"): "0.2",
    }
    cfg = RunConfig()
    lines = []
    for section in SECTIONS:
        if section == "sequences":
            lines.append("[sequences]  <name> = <path to pretrained token vectors>")
            lines.append("  max_length = 128 (fixed)   (published: 128)")
            continue
        obj = cfg.section(section)
        lines.append(f"[{section}]")
        for f in dataclasses.fields(obj):
            if f.name in _SKIP and section in ("node2vec", "deepwalk", "model"):
                continue
            value = getattr(obj, f.name)
            if isinstance(value, enum.Enum):
                value = value.value
            if section == "model" and f.name == "epochs" and value is None:
                value = "auto"
            note = published.get((section, f.name))
            lines.append(f"  {f.name} = {value}" + (f"   (published: {note})" if note else ""))
        if section == "model":
            lines.append("  recurrent activation = tanh (fixed)   (published: tanh)")
            lines.append("  output = 1 unit, sigmoid (fixed)   (published: 1, Sigmoid)")
    return "\n".join(lines)
