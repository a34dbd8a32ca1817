"""
Project files.

A project file is a JSON document:

    {
      "schema_version": 1,
      "name": "optional title",
      "cost": {"type": "threshold", "delta": 6.5},
      "activities": [
        {"name": "1", "predecessors": [], "dist": {"type": "triangular", "min": 1, "mode": 2, "max": 3},
         "actual": 2.5, "planned": 2}
      ]
    }

Every activity carries its realized duration; `dist` (stochastic problems) and
`planned` (deterministic problems) are optional but, when used, must be given
for every activity. A flat CSV sheet with the compact distribution notation
(t(1,2,3), exp(1/2), ...) can be imported as well.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from scheduling.distributions import DurationDistribution, from_spec, parse_compact
from scheduling.errors import CycleError, DomainError, IoError, ParseError, SchemaError
from scheduling.game import CLAMP, DeterministicProblem, StochasticProblem
from scheduling.project import DelayCost, Project, ThresholdCost
from utils.logger_config import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = 1
_DELTA_COMMENT = re.compile(r"^\s*#\s*delta\s*[=:]\s*(\S+)\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class ActivitySpec:
    name: str
    predecessors: Tuple[str, ...]
    actual: float
    dist: Optional[DurationDistribution] = None
    planned: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        entry: Dict[str, Any] = {"name": self.name, "predecessors": list(self.predecessors)}
        if self.dist is not None:
            entry["dist"] = self.dist.to_spec()
        entry["actual"] = self.actual
        if self.planned is not None:
            entry["planned"] = self.planned
        return entry


@dataclass(frozen=True)
class ProjectFile:
    activities: Tuple[ActivitySpec, ...]
    cost: DelayCost
    schema_version: int = SCHEMA_VERSION
    name: str = ""
    project: Project = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        project = Project.from_labels(
            [a.name for a in self.activities],
            {a.name: a.predecessors for a in self.activities},
        )
        _ = project.order
        object.__setattr__(self, "project", project)

    @property
    def n(self) -> int:
        return len(self.activities)

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.project.labels

    @property
    def has_distributions(self) -> bool:
        return all(a.dist is not None for a in self.activities)

    @property
    def has_planned(self) -> bool:
        return all(a.planned is not None for a in self.activities)

    def actual(self) -> List[float]:
        return [a.actual for a in self.activities]

    def stochastic_problem(self) -> StochasticProblem:
        if not self.has_distributions:
            raise SchemaError(["stochastic rule needs a 'dist' for every activity"])
        return StochasticProblem(self.project, tuple(a.dist for a in self.activities),
                                 self.actual(), self.cost)

    def deterministic_problem(self, adjustment: str = CLAMP) -> DeterministicProblem:
        """Planned durations from the file when present, else the means of the distributions."""
        if self.has_planned:
            return DeterministicProblem(self.project, [a.planned for a in self.activities],
                                        self.actual(), self.cost)
        if self.has_distributions:
            return self.stochastic_problem().mean_problem(adjustment)
        raise SchemaError(["deterministic rule needs 'planned' or 'dist' for every activity"])

    def to_dict(self) -> Dict[str, Any]:
        document: Dict[str, Any] = {"schema_version": self.schema_version}
        if self.name:
            document["name"] = self.name
        document["cost"] = self.cost.to_spec()
        document["activities"] = [a.to_dict() for a in self.activities]
        return document


def _number(value, where: str, violations: List[str]) -> Optional[float]:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        violations.append(f"{where} must be a number, got {value!r}")
        return None
    value = float(value)
    if not math.isfinite(value) or value < 0:
        violations.append(f"{where} must be a finite number >= 0, got {value!r}")
        return None
    return value


def _cost(spec, violations: List[str]) -> Optional[DelayCost]:
    if not isinstance(spec, dict):
        violations.append("cost must be an object like {\"type\": \"threshold\", \"delta\": 6.5}")
        return None
    if spec.get("type") != "threshold":
        violations.append(f"unsupported cost type {spec.get('type')!r}; only 'threshold' is built in")
        return None
    delta = _number(spec.get("delta"), "cost.delta", violations)
    return ThresholdCost(delta) if delta is not None else None


def collect_violations(document: Any) -> Tuple[List[str], Optional[ProjectFile]]:
    """
    Check a decoded document against the schema.

    Returns:
        (violations, project file); the project file is None whenever a
        violation was found. Precedence cycles raise CycleError.
    """
    violations: List[str] = []
    if not isinstance(document, dict):
        return ["a project file must be a JSON object"], None
    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        violations.append(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    cost = _cost(document.get("cost"), violations)

    entries = document.get("activities")
    if not isinstance(entries, list) or not entries:
        violations.append("activities must be a non-empty list")
        return violations, None

    specs: List[ActivitySpec] = []
    seen = set()
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict):
            violations.append(f"activity #{k + 1} must be an object")
            continue
        name = entry.get("name", entry.get("id"))
        if name is None or str(name).strip() == "":
            violations.append(f"activity #{k + 1} has no name")
            continue
        name = str(name)
        if name in seen:
            violations.append(f"activity {name!r} is defined twice")
        seen.add(name)

        preds = entry.get("predecessors", [])
        if not isinstance(preds, list):
            violations.append(f"activity {name!r}: predecessors must be a list of names")
            preds = []
        actual = _number(entry.get("actual"), f"activity {name!r}: actual", violations)
        planned = None
        if entry.get("planned") is not None:
            planned = _number(entry["planned"], f"activity {name!r}: planned", violations)
        dist = None
        if entry.get("dist") is not None:
            try:
                dist = from_spec(entry["dist"])
            except DomainError as e:
                violations.append(f"activity {name!r}: {e}")
        specs.append(ActivitySpec(name, tuple(str(p) for p in preds),
                                  actual if actual is not None else 0.0, dist, planned))

    names = {s.name for s in specs}
    for spec in specs:
        for pred in spec.predecessors:
            if pred not in names:
                violations.append(f"activity {spec.name!r}: unknown predecessor {pred!r}")
    for family in ("dist", "planned"):
        given = [s.name for s in specs if getattr(s, family) is not None]
        if given and len(given) != len(specs):
            missing = [s.name for s in specs if getattr(s, family) is None]
            violations.append(f"'{family}' is given for some activities but missing for {missing}")
    if specs and all(s.dist is None and s.planned is None for s in specs):
        violations.append("activities need either 'dist' or 'planned' durations")

    if violations or cost is None:
        return violations, None
    try:
        project_file = ProjectFile(tuple(specs), cost, SCHEMA_VERSION, str(document.get("name", "")))
    except DomainError as e:
        return [str(e)], None
    return [], project_file


def parse_project(document: Any) -> ProjectFile:
    violations, project_file = collect_violations(document)
    if violations:
        raise SchemaError(violations)
    return project_file


def loads(text: str) -> ProjectFile:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return parse_project(document)


def dumps(project_file: ProjectFile) -> str:
    return json.dumps(project_file.to_dict(), indent=2) + "\n"


def read_project_csv(text: str, delta: Optional[float] = None) -> ProjectFile:
    """
    Import a flat activity table.

    Columns: name, predecessors (separated by ';' or spaces), dist (compact
    notation), actual, and optionally planned. Notation with commas, such as
    t(1,2,3), must be double-quoted. The threshold comes from
    `delta` or from a leading '# delta = 6.5' comment line.
    """
    lines = text.splitlines()
    body = []
    for line in lines:
        match = _DELTA_COMMENT.match(line)
        if match:
            if delta is None:
                try:
                    delta = float(match.group(1))
                except ValueError as e:
                    raise ParseError(f"bad delta comment {line!r}") from e
            continue
        if line.strip() and not line.lstrip().startswith("#"):
            body.append(line)
    if delta is None:
        raise ParseError("CSV projects need a delta (pass it or add a '# delta = ...' line)")

    reader = csv.DictReader(io.StringIO("\n".join(body)), skipinitialspace=True)
    if reader.fieldnames is None or "actual" not in reader.fieldnames:
        raise ParseError("CSV header must name at least the columns name and actual")
    activities = []
    for row_number, row in enumerate(reader, start=2):
        name = (row.get("name") or row.get("id") or row.get("activity") or "").strip()
        entry: Dict[str, Any] = {"name": name}
        entry["predecessors"] = [p for p in re.split(r"[;\s]+", row.get("predecessors") or "") if p]
        try:
            entry["actual"] = float(row["actual"])
            if (row.get("planned") or "").strip():
                entry["planned"] = float(row["planned"])
        except (TypeError, ValueError) as e:
            raise ParseError(f"row {row_number}: durations must be numbers ({e})") from e
        if (row.get("dist") or "").strip():
            entry["dist"] = parse_compact(row["dist"]).to_spec()
        activities.append(entry)
    return parse_project({
        "schema_version": SCHEMA_VERSION,
        "cost": {"type": "threshold", "delta": delta},
        "activities": activities,
    })


def load_project(path: str, delta: Optional[float] = None) -> ProjectFile:
    """Read a .json project file or a .csv activity table."""
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from e
    logger.debug(f"Loaded project file {path}")
    if os.path.splitext(path)[1].lower() == ".csv":
        return read_project_csv(text, delta)
    project_file = loads(text)
    if delta is not None:
        project_file = ProjectFile(project_file.activities, ThresholdCost(delta),
                                   project_file.schema_version, project_file.name)
    return project_file


def save_project(project_file: ProjectFile, path: str) -> str:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(dumps(project_file))
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path


@dataclass
class ValidationReport:
    path: str
    valid: bool
    n: int = 0
    immediate_prec: int = 0
    violations: List[str] = field(default_factory=list)

    def lines(self) -> List[str]:
        if self.valid:
            return [f"{self.path}: valid, n={self.n}, immediate precedences={self.immediate_prec}"]
        return [f"{self.path}: invalid"] + [f"  - {v}" for v in self.violations]


def validate_file(path: str) -> ValidationReport:
    """
    Check a project file and describe every problem found.

    ParseError propagates for unreadable documents; schema violations and
    precedence cycles are reported rather than raised.
    """
    if os.path.splitext(path)[1].lower() == ".csv":
        try:
            project_file = load_project(path)
        except SchemaError as e:
            return ValidationReport(path, False, violations=e.violations)
        except CycleError as e:
            return ValidationReport(path, False, violations=[str(e)])
    else:
        try:
            with open(path, encoding="utf-8") as f:
                document = json.load(f)
        except OSError as e:
            raise ParseError(f"cannot read {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
        try:
            violations, project_file = collect_violations(document)
        except CycleError as e:
            return ValidationReport(path, False, violations=[str(e)])
        if violations:
            return ValidationReport(path, False, violations=violations)
    return ValidationReport(path, True, project_file.n, len(project_file.project.immediate_prec))
