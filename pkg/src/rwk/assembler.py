"""Partition function assembly: Z = |H_1|' * sum over admissible graphs of b_Gamma * I_Gamma / |Aut|."""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .graph_kit import ENUM_VERTEX_BOUND, admissible_partition_graphs
from .weight_system import TargetData, TargetError, parse_rational, rw_class


class SourceError(ValueError):
    pass


@dataclass
class SourceData:
    b1: int
    torsion_count: int = 1
    analytic_weights: dict = field(default_factory=dict)   # class key -> Fraction | float
    triple_intersection: Fraction | None = None
    n: int | None = None                                    # optional dimension pin

    def __post_init__(self):
        if not isinstance(self.b1, int) or self.b1 < 0:
            raise SourceError(f"b1 must be a nonnegative integer, got {self.b1!r}")
        if not isinstance(self.torsion_count, int) or self.torsion_count < 1:
            raise SourceError(f"torsion_count must be a positive integer, got {self.torsion_count!r}")

    def weight_for(self, key: str, n: int):
        if key in self.analytic_weights:
            return self.analytic_weights[key]
        if self.b1 == 3 and self.triple_intersection is not None:
            # each vertex integrates the triple product of the harmonic 1-forms
            return self.triple_intersection ** (2 * n)
        raise SourceError(f"missing analytic weight for admissible class {key!r}")

    def to_json(self) -> dict:
        out = {"b1": self.b1, "torsion_count": self.torsion_count,
               "analytic_weights": {k: _fmt(v) for k, v in self.analytic_weights.items()}}
        if self.triple_intersection is not None:
            out["harmonic_intersections"] = {"triple": _fmt(self.triple_intersection)}
        if self.n is not None:
            out["n"] = self.n
        return out


def _fmt(x) -> str | float:
    if isinstance(x, Fraction):
        return str(x)
    return x


def _weight_value(x):
    if isinstance(x, float):
        return x
    return parse_rational(x)


def source_from_json(data: dict) -> SourceData:
    try:
        b1 = data["b1"]
        torsion = data.get("torsion_count", 1)
        raw = data.get("analytic_weights", {}) or {}
        if not isinstance(raw, dict):
            raise SourceError("analytic_weights must be an object")
        weights = {str(k): _weight_value(v) for k, v in raw.items()}
        hi = data.get("harmonic_intersections")
        triple = None
        if hi is not None:
            triple = parse_rational(hi["triple"] if isinstance(hi, dict) else hi)
        n = data.get("n")
    except (KeyError, TypeError) as exc:
        raise SourceError(f"malformed source data: missing or bad field {exc}") from None
    except TargetError as exc:
        raise SourceError(f"analytic weight: {exc}") from None
    return SourceData(b1, torsion, weights, triple, n)


def load_source(path) -> SourceData:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SourceError(f"{path}: invalid JSON ({exc})") from None
    return source_from_json(data)


@dataclass
class GraphContribution:
    key: str
    aut: int
    rw: Fraction
    analytic: Fraction | float
    value: Fraction | float


@dataclass
class PartitionResult:
    total: Fraction | float
    torsion_count: int
    contributions: list
    ignored_keys: list

    def to_json(self) -> dict:
        return {
            "Z": _fmt(self.total),
            "torsion_count": self.torsion_count,
            "graphs": [{"key": c.key, "aut": c.aut, "rw": str(c.rw),
                        "analytic": _fmt(c.analytic), "contribution": _fmt(c.value)}
                       for c in self.contributions],
            "ignored_keys": self.ignored_keys,
        }


def thread_count() -> int:
    raw = os.environ.get("RWK_THREADS")
    if raw:
        try:
            k = int(raw)
        except ValueError:
            raise SourceError(f"RWK_THREADS must be an integer, got {raw!r}") from None
        return max(1, k)
    return os.cpu_count() or 1


def _rw_of(args):
    graph, target = args
    return rw_class(graph, target)


def assemble_detailed(target: TargetData, source: SourceData) -> PartitionResult:
    n = target.n
    if source.n is not None and source.n != n:
        raise SourceError(f"source is pinned to n={source.n} but the target has n={n}")
    if n == 0:
        return PartitionResult(Fraction(source.torsion_count), source.torsion_count, [],
                               sorted(source.analytic_weights))
    if source.b1 > 3:
        return PartitionResult(Fraction(0), source.torsion_count, [],
                               sorted(source.analytic_weights))
    if 2 * n > ENUM_VERTEX_BOUND:
        raise SourceError(f"2n = {2 * n} exceeds the enumeration bound {ENUM_VERTEX_BOUND}")
    classes = admissible_partition_graphs(n, source.b1)
    keys = [c.key for c in classes]
    analytic = [source.weight_for(k, n) for k in keys]

    workers = min(thread_count(), len(classes))
    jobs = [(c.graph, target) for c in classes]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rws = list(ex.map(_rw_of, jobs))
    else:
        rws = [_rw_of(j) for j in jobs]

    contribs = []
    total: Fraction | float = Fraction(0)
    for c, rw, a in zip(classes, rws, analytic):
        v = rw * a / c.aut if isinstance(a, float) else Fraction(rw) * a / c.aut
        contribs.append(GraphContribution(c.key, c.aut, rw, a, v))
        total = total + v
    total = total * source.torsion_count
    ignored = sorted(set(source.analytic_weights) - set(keys))
    return PartitionResult(total, source.torsion_count, contribs, ignored)


def assemble_partition(target: TargetData, source: SourceData):
    return assemble_detailed(target, source).total
