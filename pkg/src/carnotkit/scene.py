"""Scene configuration: a flat sectioned key = value format.

A scene declares one group, named domains (defining-function
expressions with bounding boxes), named scalar fields, and a list of
experiments.  The format is line based: ``[section]`` headers, ``key =
value`` pairs, ``#`` comments; the only repeatable key is ``b`` (one
structure-constant entry per line).  No nesting beyond the section
level, so files diff cleanly and parse trivially.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expressions import ExpressionError, expression_field, parse_expression
from .geometry import Domain
from .groups import (
    GroupSpec,
    free_step2_group,
    group_from_entries,
    heisenberg_group,
    quaternion_htype_group,
    validate_spec,
)
from .hcalc import ScalarField

__all__ = ["SceneError", "ExperimentConfig", "SceneConfig", "load_scene", "parse_scene_text"]

GROUP_KINDS = ("heisenberg", "htype-quaternion", "free-step2", "explicit")
EXPERIMENT_TYPES = (
    "perimeter",
    "char-scan",
    "density",
    "limits",
    "trace",
    "coarea",
    "ratio",
    "counterexample",
    "symmetry-bound",
)


class SceneError(ValueError):
    """All schema violations of a scene file, enumerated."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid scene:\n" + "\n".join(f"  - {p}" for p in problems))
        self.problems = problems


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    type: str
    params: dict
    seed: int | None = None


@dataclass(frozen=True)
class SceneConfig:
    group: GroupSpec
    domains: dict[str, Domain]
    fields: dict[str, ScalarField]
    experiments: tuple[ExperimentConfig, ...]
    expression_flags: dict[str, tuple[str, ...]]
    path: str = "<memory>"


_SECTION_RE = re.compile(r"^\[(group|domain|field|experiment)(?:\s+([A-Za-z0-9_-]+))?\]$")


def _parse_sections(text: str, problems: list[str]):
    """Split the file into (kind, name, {key: [values]}) triples."""
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            mm = _SECTION_RE.match(line)
            if not mm:
                problems.append(f"line {lineno}: malformed section header {line!r}")
                current = None
                continue
            kind, name = mm.group(1), mm.group(2)
            if kind != "group" and not name:
                problems.append(f"line {lineno}: section [{kind}] needs a name")
            current = (kind, name or "", {})
            sections.append(current)
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        if current is None:
            problems.append(f"line {lineno}: key outside any section")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        store = current[2]
        if key == "b":
            store.setdefault("b", []).append((value, lineno))
        elif key in store:
            problems.append(f"line {lineno}: duplicate key {key!r} in [{current[0]} {current[1]}]")
        else:
            store[key] = (value, lineno)
    return sections


def _parse_pairs(value: str) -> list[tuple[float, float]]:
    """Parse '(a, b) (c, d) ...' into float pairs."""
    pairs = re.findall(r"\(([^()]*)\)", value)
    out = []
    for body in pairs:
        nums = [float(x) for x in body.split(",")]
        if len(nums) != 2:
            raise ValueError(f"expected a pair, got ({body})")
        out.append((nums[0], nums[1]))
    if not out:
        raise ValueError(f"expected parenthesized pairs, got {value!r}")
    return out


def _parse_tuple(value: str) -> tuple[float, ...]:
    return tuple(float(x) for x in value.strip().lstrip("(").rstrip(")").split(","))


def parse_scene_text(text: str, path: str = "<memory>") -> SceneConfig:
    """Parse and validate scene text; raises SceneError listing every problem."""
    problems: list[str] = []
    sections = _parse_sections(text, problems)

    group_secs = [s for s in sections if s[0] == "group"]
    if len(group_secs) != 1:
        problems.append(f"exactly one [group] section required, found {len(group_secs)}")
        raise SceneError(problems)
    gstore = group_secs[0][2]

    def take(store, key, default=None):
        if key in store:
            return store[key][0]
        return default

    kind = take(gstore, "kind", "heisenberg")
    eps_text = take(gstore, "eps", "0.5")
    spec = None
    try:
        eps = float(eps_text)
    except ValueError:
        problems.append(f"group eps is not a number: {eps_text!r}")
        eps = 0.5
    if kind not in GROUP_KINDS:
        problems.append(f"unknown group kind {kind!r}, expected one of {GROUP_KINDS}")
    elif kind == "heisenberg":
        spec = heisenberg_group(int(take(gstore, "k", "1")), eps)
    elif kind == "htype-quaternion":
        spec = quaternion_htype_group(eps)
    elif kind == "free-step2":
        spec = free_step2_group(int(take(gstore, "k", "3")), eps)
    else:
        try:
            m = int(take(gstore, "m", "0"))
            n = int(take(gstore, "n", "0"))
            entries = []
            for value, lineno in gstore.get("b", []):
                nums = _parse_tuple(value)
                if len(nums) != 4:
                    problems.append(f"line {lineno}: b entry needs (i, j, l, value)")
                    continue
                entries.append((int(nums[0]), int(nums[1]), int(nums[2]), nums[3]))
            spec = group_from_entries(m, n, entries, eps)
        except ValueError as exc:
            problems.append(f"explicit group: {exc}")
    if spec is not None:
        report = validate_spec(spec)
        problems.extend(f"group: {msg}" for msg in report.failures)
    else:
        spec = heisenberg_group(1)  # placeholder so the remaining checks can run

    domains: dict[str, Domain] = {}
    fields: dict[str, ScalarField] = {}
    flags: dict[str, tuple[str, ...]] = {}
    for kind_, name, store in sections:
        if kind_ == "domain":
            phi_text = take(store, "phi")
            bbox_text = take(store, "bbox")
            if phi_text is None:
                problems.append(f"domain {name}: missing phi")
                continue
            try:
                sf, fl = expression_field(spec, parse_expression(phi_text))
            except ExpressionError as exc:
                problems.append(f"domain {name}: {exc}")
                continue
            try:
                bbox = _parse_pairs(bbox_text) if bbox_text else [(-1.5, 1.5)] * spec.dim
                if len(bbox) != spec.dim:
                    raise ValueError(f"bbox needs {spec.dim} pairs")
            except ValueError as exc:
                problems.append(f"domain {name}: {exc}")
                continue
            domains[name] = Domain(sf, np.asarray(bbox))
            flags[f"domain:{name}"] = tuple(sorted(fl))
        elif kind_ == "field":
            expr_text = take(store, "expr")
            if expr_text is None:
                problems.append(f"field {name}: missing expr")
                continue
            try:
                sf, fl = expression_field(spec, parse_expression(expr_text))
            except ExpressionError as exc:
                problems.append(f"field {name}: {exc}")
                continue
            fields[name] = sf
            flags[f"field:{name}"] = tuple(sorted(fl))

    experiments = []
    for kind_, name, store in sections:
        if kind_ != "experiment":
            continue
        etype = take(store, "type")
        if etype not in EXPERIMENT_TYPES:
            problems.append(f"experiment {name}: unknown type {etype!r}")
            continue
        params = {k: v[0] for k, v in store.items() if k not in ("type", "seed") and k != "b"}
        seed_text = take(store, "seed")
        seed = None
        if seed_text is not None:
            try:
                seed = int(seed_text)
            except ValueError:
                problems.append(f"experiment {name}: seed is not an integer")
        for refkey, pool, label in (
            ("domain", domains, "domain"),
            ("set", domains, "domain"),
            ("field", fields, "field"),
        ):
            if refkey in params and params[refkey] not in pool:
                problems.append(
                    f"experiment {name}: references undefined {label} {params[refkey]!r}"
                )
        experiments.append(ExperimentConfig(name, etype, params, seed))

    if problems:
        raise SceneError(problems)
    return SceneConfig(spec, domains, fields, tuple(experiments), flags, path)


def load_scene(path) -> SceneConfig:
    """Read and validate a scene file."""
    p = Path(path)
    return parse_scene_text(p.read_text(), str(p))
