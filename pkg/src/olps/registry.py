"""Name -> strategy lookup with typed parameter parsing."""

from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Sequence

from . import benchmarks, follow_loser, follow_winner, meta, pattern_matching
from .engine import Strategy
from .params import ParamError

_CLASSES = (
    benchmarks.BuyAndHold, benchmarks.BestStock, benchmarks.CRP, benchmarks.UCRP, benchmarks.BCRP,
    follow_winner.UniversalPortfolio, follow_winner.ExponentialGradient,
    follow_winner.GradientProjection, follow_winner.ExpectationMaximization,
    follow_winner.FollowTheLeader, follow_winner.SCRP, follow_winner.MixedFTL, follow_winner.WSCRP,
    follow_winner.VRP, follow_winner.OnlineNewtonStep, follow_winner.ExpConcaveFTL,
    follow_winner.AggregatingStocks, follow_winner.SwitchingPortfolio,
    follow_loser.Anticor, follow_loser.PAMR, follow_loser.CWMR, follow_loser.OLMAR, follow_loser.RMR,
    pattern_matching.HistogramLogOptimal, pattern_matching.KernelLogOptimal,
    pattern_matching.NearestNeighborLogOptimal, pattern_matching.CORN,
    pattern_matching.KernelSemiLog, pattern_matching.KernelMarkowitz, pattern_matching.KernelGV,
)

_META = (meta.AggregatingAlgorithm, meta.BAHCombination, meta.OnlineGradientUpdate,
         meta.OnlineNewtonUpdate, meta.FollowLeadingHistory)

STRATEGIES: Dict[str, type] = {cls.name: cls for cls in _CLASSES}
META: Dict[str, type] = {cls.name: cls for cls in _META}

DEFAULT_EXPERTS = ("ucrp",)
FLH_DEFAULT_BASE = "ons"


class UnknownStrategy(KeyError):
    def __str__(self):
        return f"unknown strategy {self.args[0]!r}"


def names(include_meta: bool = True) -> List[str]:
    out = list(STRATEGIES)
    if include_meta:
        out += list(META)
    return out


def _lookup(name: str) -> type:
    if name in STRATEGIES:
        return STRATEGIES[name]
    if name in META:
        return META[name]
    raise UnknownStrategy(name)


def parse_params(cls: type, raw: Optional[Mapping] = None) -> dict:
    """Validate raw key/value pairs (strings or values) against ``cls.PARAMS``."""
    raw = dict(raw or {})
    schema = {p.name: p for p in cls.PARAMS}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        allowed = ", ".join(schema) or "none"
        raise ParamError(f"{cls.name}: unknown parameter(s) {', '.join(unknown)} (allowed: {allowed})")
    return {k: schema[k].parse(v) for k, v in raw.items()}


def parse_expert(spec: str):
    """'pamr' or 'pamr[eps=0.3;variant=pamr1]' -> (name, {key: raw})."""
    spec = spec.strip()
    if "[" not in spec:
        return spec, {}
    if not spec.endswith("]"):
        raise ParamError(f"malformed expert spec {spec!r}")
    name, body = spec[:-1].split("[", 1)
    raw = {}
    for part in body.split(";"):
        if not part.strip():
            continue
        if "=" not in part:
            raise ParamError(f"expected key=value in {spec!r}")
        k, v = part.split("=", 1)
        raw[k.strip()] = v.strip()
    return name.strip(), raw


def split_experts(text: str) -> List[str]:
    """Split on commas outside brackets."""
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [s.strip() for s in out if s.strip()]


def create(name: str, params: Optional[Mapping] = None,
           experts: Optional[Sequence[str]] = None, meta_params: Optional[Mapping] = None) -> Strategy:
    """Build a strategy by registry name.

    Meta strategies take their own settings from ``meta_params`` (``params``
    is accepted too) and a list of expert specs; "meta:flh" uses its single
    expert as the base algorithm.
    """
    cls = _lookup(name)
    if name not in META:
        if experts:
            raise ParamError(f"{name} does not take experts")
        return cls(**parse_params(cls, params))

    own = dict(meta_params or {})
    own.update(params or {})
    specs = list(experts or ())
    if cls is meta.FollowLeadingHistory:
        if len(specs) > 1:
            raise ParamError("meta:flh takes exactly one base expert")
        base_name, base_raw = parse_expert(specs[0]) if specs else (FLH_DEFAULT_BASE, {})
        base_cls = _lookup(base_name)
        if base_name in META:
            raise ParamError("meta strategies cannot be nested")
        base_kw = parse_params(base_cls, base_raw)
        parse_params(cls, own)
        return cls(lambda: base_cls(**base_kw), base_name)

    built = []
    for spec in specs or DEFAULT_EXPERTS:
        ename, eraw = parse_expert(spec)
        if ename in META:
            raise ParamError("meta strategies cannot be nested")
        built.append(create(ename, eraw))
    return cls(built, **parse_params(cls, own))


def category(name: str) -> str:
    return _lookup(name).category


def catalog() -> List[dict]:
    """Every registered strategy with its category and parameter schema."""
    out = []
    for name in names():
        cls = _lookup(name)
        entry = {"name": name, "category": cls.category, "hindsight": cls.hindsight,
                 "params": [p.describe() for p in cls.PARAMS]}
        if name in META:
            entry["takes_experts"] = True
        out.append(entry)
    return out
