"""Pipeline search space: component catalog, sampling, variation, canonical encoding.

A pipeline is an ordered list of configured transformer steps followed by
exactly one estimator step. All types here are immutable values; every
operation is a pure function of its inputs plus an explicit ``random.Random``
stream, so workers can share a space freely as long as each owns its rng.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

__all__ = [
    "Domain",
    "ComponentSpec",
    "SearchSpace",
    "Pipeline",
    "Step",
    "OriginTag",
    "SpaceError",
    "PipelineParseError",
    "validate_space",
    "sample_pipeline",
    "mutate",
    "crossover",
    "canonical_encode",
    "canonical_decode",
]

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
# Categorical atoms must survive the whitespace-free name(k=v,...) encoding
# without quoting, so commas/parens/'>' are excluded.
_ATOM_RE = re.compile(r"[A-Za-z0-9_.+-]+")

MUTATION_OPS = ("hyperparam", "replace_step", "insert_transformer", "shrink")


class SpaceError(ValueError):
    """Invalid search space, pipeline, or variation request."""


class PipelineParseError(ValueError):
    """Malformed canonical pipeline string."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class Domain:
    """One hyperparameter domain: categorical, integer, real, or boolean."""

    kind: str  # categorical | integer | real | boolean
    choices: tuple = ()
    lo: float = 0.0
    hi: float = 0.0
    scale: str = "linear"  # linear | log

    @staticmethod
    def categorical(choices) -> "Domain":
        return Domain(kind="categorical", choices=tuple(choices))

    @staticmethod
    def integer(lo: int, hi: int, scale: str = "linear") -> "Domain":
        return Domain(kind="integer", lo=int(lo), hi=int(hi), scale=scale)

    @staticmethod
    def real(lo: float, hi: float, scale: str = "linear") -> "Domain":
        return Domain(kind="real", lo=float(lo), hi=float(hi), scale=scale)

    @staticmethod
    def boolean() -> "Domain":
        return Domain(kind="boolean")

    def violations(self, path: str) -> list[str]:
        out = []
        if self.kind not in ("categorical", "integer", "real", "boolean"):
            out.append(f"{path}: unknown domain kind {self.kind!r}")
            return out
        if self.kind == "categorical":
            if not self.choices:
                out.append(f"{path}: categorical domain has no choices")
            if len(set(self.choices)) != len(self.choices):
                out.append(f"{path}: categorical choices contain duplicates")
            for c in self.choices:
                if not isinstance(c, str) or not _ATOM_RE.fullmatch(c):
                    out.append(f"{path}: categorical atom {c!r} is not encodable")
        elif self.kind in ("integer", "real"):
            if self.scale not in ("linear", "log"):
                out.append(f"{path}: unknown scale {self.scale!r}")
            if not self.lo < self.hi:
                out.append(f"{path}: requires lo < hi, got lo={self.lo} hi={self.hi}")
            if self.scale == "log" and self.lo <= 0:
                out.append(f"{path}: log scale requires lo > 0, got lo={self.lo}")
        return out

    def contains(self, value) -> bool:
        if self.kind == "categorical":
            return value in self.choices
        if self.kind == "boolean":
            return isinstance(value, bool)
        if self.kind == "integer":
            return isinstance(value, int) and not isinstance(value, bool) \
                and self.lo <= value <= self.hi
        if self.kind == "real":
            return isinstance(value, float) and self.lo <= value <= self.hi \
                and math.isfinite(value)
        return False

    def sample(self, rng):
        """Uniform draw; log-scaled numerics are uniform in log10."""
        if self.kind == "categorical":
            return self.choices[rng.randrange(len(self.choices))]
        if self.kind == "boolean":
            return rng.random() < 0.5
        if self.kind == "integer":
            if self.scale == "log":
                v = 10.0 ** rng.uniform(math.log10(self.lo), math.log10(self.hi))
                return min(int(self.hi), max(int(self.lo), int(round(v))))
            return rng.randint(int(self.lo), int(self.hi))
        if self.scale == "log":
            return 10.0 ** rng.uniform(math.log10(self.lo), math.log10(self.hi))
        return rng.uniform(self.lo, self.hi)

    def sample_different(self, rng, current):
        """Uniform draw over the domain minus ``current``; None if impossible."""
        if self.kind == "categorical":
            others = [c for c in self.choices if c != current]
            if not others:
                return None
            return others[rng.randrange(len(others))]
        if self.kind == "boolean":
            return not current
        # Numeric: resample until it differs. Uniform over the remaining values;
        # for reals a collision has measure zero, for integers lo < hi always
        # leaves an alternative, so the retry cap is just a safety valve.
        for _ in range(100):
            v = self.sample(rng)
            if v != current:
                return v
        return None

    def mutable(self) -> bool:
        """True if the domain holds at least two distinct values."""
        if self.kind == "categorical":
            return len(set(self.choices)) >= 2
        return True  # boolean and validated numerics always do


@dataclass(frozen=True)
class ComponentSpec:
    id: str
    role: str  # transformer | estimator
    hyperparams: dict = field(default_factory=dict)  # name -> Domain


@dataclass(frozen=True)
class SearchSpace:
    components: tuple
    max_pipeline_length: int

    def __init__(self, components, max_pipeline_length: int):
        object.__setattr__(self, "components", tuple(components))
        object.__setattr__(self, "max_pipeline_length", int(max_pipeline_length))

    def component(self, comp_id: str) -> ComponentSpec:
        for c in self.components:
            if c.id == comp_id:
                return c
        raise SpaceError(f"unknown component {comp_id}")

    @property
    def transformers(self) -> list:
        return [c for c in self.components if c.role == "transformer"]

    @property
    def estimators(self) -> list:
        return [c for c in self.components if c.role == "estimator"]


@dataclass(frozen=True)
class Step:
    component: str
    params: tuple  # sorted tuple of (name, value)

    @staticmethod
    def make(component: str, params: dict) -> "Step":
        return Step(component, tuple(sorted(params.items())))

    def param_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class Pipeline:
    steps: tuple  # of Step

    def __len__(self) -> int:
        return len(self.steps)

    def component_ids(self) -> list:
        return [s.component for s in self.steps]


@dataclass(frozen=True)
class OriginTag:
    """Where a candidate came from: seed, random sample, variation, or an
    ASHA promotion (re-evaluation of an earlier candidate at higher fidelity)."""

    kind: str  # seed | random | mutation | crossover | promotion
    op: str | None = None  # mutation operator name
    parent_ids: tuple = ()

    def __post_init__(self):
        expected = {"seed": 0, "random": 0, "mutation": 1, "crossover": 2, "promotion": 1}
        if self.kind not in expected:
            raise SpaceError(f"unknown origin kind {self.kind!r}")
        if len(self.parent_ids) != expected[self.kind]:
            raise SpaceError(
                f"origin {self.kind} requires {expected[self.kind]} parent ids, "
                f"got {len(self.parent_ids)}")

    @property
    def label(self) -> str:
        if self.kind == "mutation":
            return f"mutation({self.op})"
        return self.kind

    @staticmethod
    def from_label(label: str, parent_ids=()) -> "OriginTag":
        m = re.fullmatch(r"mutation\((\w+)\)", label)
        if m:
            return OriginTag("mutation", m.group(1), tuple(parent_ids))
        return OriginTag(label, None, tuple(parent_ids))


# ---------------------------------------------------------------------------
# Validation

def validate_space(space: SearchSpace) -> list[str]:
    """Collect every invariant violation; an empty list means the space is valid."""
    out: list[str] = []
    if space.max_pipeline_length < 1:
        out.append(f"max_pipeline_length must be >= 1, got {space.max_pipeline_length}")
    seen = set()
    for comp in space.components:
        path = f"components.{comp.id}"
        if comp.id in seen:
            out.append(f"{path}: duplicate component id")
        seen.add(comp.id)
        if not _IDENT_RE.fullmatch(comp.id):
            out.append(f"{path}: id is not a valid identifier")
        if comp.role not in ("transformer", "estimator"):
            out.append(f"{path}: unknown role {comp.role!r}")
        for name, dom in comp.hyperparams.items():
            hp_path = f"{path}.{name}"
            if not _IDENT_RE.fullmatch(name):
                out.append(f"{hp_path}: hyperparameter name is not a valid identifier")
            out.extend(dom.violations(hp_path))
    if not any(c.role == "estimator" for c in space.components):
        out.append("no estimator-role component in space")
    return out


def validate_pipeline(p: Pipeline, space: SearchSpace) -> list[str]:
    out: list[str] = []
    n = len(p.steps)
    if n < 1:
        return ["pipeline is empty"]
    if n > space.max_pipeline_length:
        out.append(f"pipeline length {n} exceeds max {space.max_pipeline_length}")
    ids = p.component_ids()
    if len(set(ids)) != len(ids):
        out.append("duplicate component ids within pipeline")
    for i, step in enumerate(p.steps):
        try:
            comp = space.component(step.component)
        except SpaceError:
            out.append(f"steps[{i}]: unknown component {step.component}")
            continue
        want_role = "estimator" if i == n - 1 else "transformer"
        if comp.role != want_role:
            out.append(f"steps[{i}]: {step.component} has role {comp.role}, expected {want_role}")
        for name, value in step.params:
            dom = comp.hyperparams.get(name)
            if dom is None:
                out.append(f"steps[{i}].{name}: no such hyperparameter on {step.component}")
            elif not dom.contains(value):
                out.append(f"steps[{i}].{name}: value {value!r} outside domain")
        for name in comp.hyperparams:
            if name not in dict(step.params):
                out.append(f"steps[{i}].{name}: missing assignment")
    return out


def _require_valid_space(space: SearchSpace) -> None:
    problems = validate_space(space)
    if problems:
        raise SpaceError("invalid search space: " + "; ".join(problems))


# ---------------------------------------------------------------------------
# Sampling

def _sample_params(comp: ComponentSpec, rng) -> dict:
    return {name: dom.sample(rng) for name, dom in sorted(comp.hyperparams.items())}


def sample_pipeline(space: SearchSpace, rng) -> Pipeline:
    """Draw a uniform-length pipeline with uniformly sampled components and
    hyperparameters. Deterministic given the rng state."""
    _require_valid_space(space)
    transformers = space.transformers
    length = rng.randint(1, space.max_pipeline_length)
    # Duplicate ids are forbidden, so length is capped by the distinct
    # transformers available.
    length = min(length, 1 + len(transformers))
    chosen = rng.sample(transformers, length - 1) if length > 1 else []
    estimator = space.estimators[rng.randrange(len(space.estimators))]
    steps = [Step.make(c.id, _sample_params(c, rng)) for c in chosen]
    steps.append(Step.make(estimator.id, _sample_params(estimator, rng)))
    return Pipeline(tuple(steps))


# ---------------------------------------------------------------------------
# Mutation

def _applicable_mutations(p: Pipeline, space: SearchSpace) -> list[str]:
    ops = []
    used = set(p.component_ids())
    if any(dom.mutable() for s in p.steps
           for dom in space.component(s.component).hyperparams.values()):
        ops.append("hyperparam")
    # replace_step swaps to a *different* component id of the same role so the
    # encoding is guaranteed to change.
    for i, step in enumerate(p.steps):
        role = "estimator" if i == len(p.steps) - 1 else "transformer"
        pool = space.estimators if role == "estimator" else space.transformers
        if any(c.id != step.component and c.id not in used for c in pool):
            ops.append("replace_step")
            break
    if len(p.steps) < space.max_pipeline_length and \
            any(c.id not in used for c in space.transformers):
        ops.append("insert_transformer")
    if len(p.steps) > 1:
        ops.append("shrink")
    return ops


def mutate(p: Pipeline, space: SearchSpace, rng, parent_id: str = "") -> tuple:
    """Apply exactly one variation operator, chosen uniformly among the
    applicable ones. Raises SpaceError("no applicable mutation") when the
    pipeline cannot change at all."""
    _require_valid_space(space)
    ops = _applicable_mutations(p, space)
    if not ops:
        raise SpaceError("no applicable mutation")
    op = ops[rng.randrange(len(ops))]
    steps = list(p.steps)

    if op == "hyperparam":
        slots = [(i, name, dom)
                 for i, s in enumerate(steps)
                 for name, dom in sorted(space.component(s.component).hyperparams.items())
                 if dom.mutable()]
        i, name, dom = slots[rng.randrange(len(slots))]
        params = steps[i].param_dict()
        new_value = dom.sample_different(rng, params[name])
        if new_value is None:  # mutable() should prevent this
            raise SpaceError("no applicable mutation")
        params[name] = new_value
        steps[i] = Step.make(steps[i].component, params)
    elif op == "replace_step":
        used = set(p.component_ids())
        slots = []
        for i, step in enumerate(steps):
            role = "estimator" if i == len(steps) - 1 else "transformer"
            pool = space.estimators if role == "estimator" else space.transformers
            options = [c for c in pool if c.id != step.component and c.id not in used]
            if options:
                slots.append((i, options))
        i, options = slots[rng.randrange(len(slots))]
        comp = options[rng.randrange(len(options))]
        steps[i] = Step.make(comp.id, _sample_params(comp, rng))
    elif op == "insert_transformer":
        used = set(p.component_ids())
        options = [c for c in space.transformers if c.id not in used]
        comp = options[rng.randrange(len(options))]
        pos = rng.randint(0, len(steps) - 1)  # anywhere before the estimator
        steps.insert(pos, Step.make(comp.id, _sample_params(comp, rng)))
    else:  # shrink
        pos = rng.randrange(len(steps) - 1)
        del steps[pos]

    origin = OriginTag("mutation", op, (parent_id,))
    return Pipeline(tuple(steps)), origin


# ---------------------------------------------------------------------------
# Crossover

def crossover(a: Pipeline, b: Pipeline, space: SearchSpace, rng,
              parent_ids: tuple = ("", "")) -> tuple:
    """Single-point structural crossover: a transformer prefix of ``a`` glued
    to an estimator-terminated suffix of ``b``. Falls back to exchanging one
    shared-component hyperparameter when no structural cut is valid; raises
    SpaceError("degenerate crossover") when the parents cannot mix at all."""
    _require_valid_space(space)
    cuts = []
    for i in range(1, len(a.steps)):  # prefix of a's transformers, non-empty
        prefix_ids = {s.component for s in a.steps[:i]}
        for j in range(len(b.steps)):  # suffix keeps b's estimator
            suffix = b.steps[j:]
            if i + len(suffix) > space.max_pipeline_length:
                continue
            if prefix_ids & {s.component for s in suffix}:
                continue
            cuts.append((i, j))
    origin = OriginTag("crossover", None, tuple(parent_ids))
    if cuts:
        i, j = cuts[rng.randrange(len(cuts))]
        return Pipeline(a.steps[:i] + b.steps[j:]), origin

    # Hyperparameter exchange: copy one differing value from b into a.
    by_id = {s.component: s for s in b.steps}
    swaps = []
    for idx, step in enumerate(a.steps):
        other = by_id.get(step.component)
        if other is None:
            continue
        theirs = other.param_dict()
        for name, value in step.params:
            if name in theirs and theirs[name] != value:
                swaps.append((idx, name, theirs[name]))
    if not swaps:
        raise SpaceError("degenerate crossover")
    idx, name, value = swaps[rng.randrange(len(swaps))]
    steps = list(a.steps)
    params = steps[idx].param_dict()
    params[name] = value
    steps[idx] = Step.make(steps[idx].component, params)
    return Pipeline(tuple(steps)), origin


# ---------------------------------------------------------------------------
# Canonical encoding: name(k=v,...) steps joined by ">", no whitespace,
# params sorted by name, reals at 17 significant digits.

def _encode_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def canonical_encode(p: Pipeline) -> str:
    parts = []
    for step in p.steps:
        inner = ",".join(f"{name}={_encode_value(v)}" for name, v in step.params)
        parts.append(f"{step.component}({inner})")
    return ">".join(parts)


def _parse_value(text: str, dom: Domain, pos: int):
    if dom.kind == "boolean":
        if text == "true":
            return True
        if text == "false":
            return False
        raise PipelineParseError(f"expected true/false, got {text!r}", pos)
    if dom.kind == "integer":
        try:
            return int(text)
        except ValueError:
            raise PipelineParseError(f"expected integer, got {text!r}", pos) from None
    if dom.kind == "real":
        try:
            return float(text)
        except ValueError:
            raise PipelineParseError(f"expected real, got {text!r}", pos) from None
    return text  # categorical atom


def canonical_decode(s: str, space: SearchSpace) -> Pipeline:
    """Inverse of canonical_encode against a given space. Raises
    PipelineParseError with a position on malformed input and SpaceError for
    unknown components or out-of-domain values."""
    if not s:
        raise PipelineParseError("empty pipeline string", 0)
    steps = []
    pos = 0
    for chunk in s.split(">"):
        m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\((.*)\)$", chunk)
        if not m:
            raise PipelineParseError(f"malformed step {chunk!r}", pos)
        comp_id, body = m.group(1), m.group(2)
        try:
            comp = space.component(comp_id)
        except SpaceError:
            raise SpaceError(f"unknown component {comp_id}") from None
        params = {}
        if body:
            for assign in body.split(","):
                if "=" not in assign:
                    raise PipelineParseError(f"malformed assignment {assign!r}", pos)
                name, _, raw = assign.partition("=")
                dom = comp.hyperparams.get(name)
                if dom is None:
                    raise SpaceError(f"no hyperparameter {name} on {comp_id}")
                params[name] = _parse_value(raw, dom, pos)
        steps.append(Step.make(comp_id, params))
        pos += len(chunk) + 1
    p = Pipeline(tuple(steps))
    problems = validate_pipeline(p, space)
    if problems:
        raise SpaceError("decoded pipeline invalid: " + "; ".join(problems))
    return p
