"""Dataset ingestion: experiment JSON files, survey CSV, and a capture adapter.

One experiment file per run, JSON, units meters/seconds/radians:

    {
      "experiment_id": "passing_01", "scenario_id": "passing", "run_index": 1,
      "goal": {"x": ..., "y": ..., "theta": ...},
      "robot": {"states": [{"t","x","y","theta","v_lin","v_ang"}, ...]},
      "agents": [{"id": "p1", "states": [...]}, ...],
      "map": {"bounds": {"xmin","ymin","xmax","ymax"},
              "segments": [[x1,y1,x2,y2], ...]}        # optional
    }
"""

from __future__ import annotations

import csv
import json
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .core import (
    HM_NAMES,
    ExperimentRecord,
    ObstacleMap,
    Pose2D,
    SchemaError,
    SurveyEntry,
    SurveyRow,
    SurveyTable,
    TimedState,
    Trajectory,
    ValidationError,
    validate_record,
)

STATE_FIELDS = ("t", "x", "y", "theta", "v_lin", "v_ang")


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{where}: missing required field '{key}'")
    return obj[key]


def _states_from_json(items: list, where: str, subject_id: str, kind: str) -> Trajectory:
    states = []
    for i, raw in enumerate(items):
        vals = {}
        for name in STATE_FIELDS:
            vals[name] = float(_require(raw, name, f"{where} state[{i}]"))
            if not math.isfinite(vals[name]):
                raise SchemaError(f"{where} state[{i}]: non-finite '{name}'")
        states.append(
            TimedState(
                t=vals["t"],
                pose=Pose2D(vals["x"], vals["y"], vals["theta"]),
                v_lin=vals["v_lin"],
                v_ang=vals["v_ang"],
            )
        )
    return Trajectory(states=tuple(states), subject_id=subject_id, subject_kind=kind)


def record_from_dict(doc: dict, where: str = "<dict>") -> ExperimentRecord:
    experiment_id = str(_require(doc, "experiment_id", where))
    scenario_id = str(_require(doc, "scenario_id", where))
    run_index = int(_require(doc, "run_index", where))

    goal_raw = _require(doc, "goal", where)
    goal = Pose2D(
        float(_require(goal_raw, "x", f"{where} goal")),
        float(_require(goal_raw, "y", f"{where} goal")),
        float(goal_raw.get("theta", 0.0)),
    )

    robot_raw = _require(doc, "robot", where)
    robot = _states_from_json(
        _require(robot_raw, "states", f"{where} robot"), where, "robot", "robot"
    )

    agents = []
    for j, agent_raw in enumerate(doc.get("agents", [])):
        agent_id = str(_require(agent_raw, "id", f"{where} agents[{j}]"))
        agents.append(
            _states_from_json(
                _require(agent_raw, "states", f"{where} agents[{j}]"),
                where,
                agent_id,
                "human",
            )
        )

    obstacle_map = None
    if doc.get("map") is not None:
        map_raw = doc["map"]
        b = _require(map_raw, "bounds", f"{where} map")
        bounds = tuple(float(_require(b, k, f"{where} map bounds"))
                       for k in ("xmin", "ymin", "xmax", "ymax"))
        segments = tuple(
            (float(s[0]), float(s[1]), float(s[2]), float(s[3]))
            for s in map_raw.get("segments", [])
        )
        obstacle_map = ObstacleMap(segments=segments, bounds=bounds)

    return ExperimentRecord(
        experiment_id=experiment_id,
        scenario_id=scenario_id,
        run_index=run_index,
        robot=robot,
        agents=tuple(agents),
        goal=goal,
        map=obstacle_map,
    )


def record_to_dict(rec: ExperimentRecord) -> dict:
    def states(traj: Trajectory) -> list[dict]:
        return [
            {
                "t": s.t,
                "x": s.pose.x,
                "y": s.pose.y,
                "theta": s.pose.theta,
                "v_lin": s.v_lin,
                "v_ang": s.v_ang,
            }
            for s in traj.states
        ]

    doc: dict[str, Any] = {
        "experiment_id": rec.experiment_id,
        "scenario_id": rec.scenario_id,
        "run_index": rec.run_index,
        "goal": {"x": rec.goal.x, "y": rec.goal.y, "theta": rec.goal.theta},
        "robot": {"states": states(rec.robot)},
        "agents": [{"id": a.subject_id, "states": states(a)} for a in rec.agents],
    }
    if rec.map is not None:
        xmin, ymin, xmax, ymax = rec.map.bounds
        doc["map"] = {
            "bounds": {"xmin": xmin, "ymin": ymin, "xmax": xmax, "ymax": ymax},
            "segments": [list(seg) for seg in rec.map.segments],
        }
    return doc


def load_record(path: str | Path, strict: bool = False) -> ExperimentRecord:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    try:
        rec = record_from_dict(doc, where=str(path))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    validate_record(rec, strict=strict, source=str(path))
    return rec


def load_dataset(dir_path: str | Path, strict: bool = False) -> list[ExperimentRecord]:
    """Load every ``*.json`` experiment file under a directory.

    Returns records deterministically ordered by (scenario_id, run_index,
    experiment_id). An empty directory yields an empty list with a warning.
    """
    dir_path = Path(dir_path)
    if not dir_path.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {dir_path}")
    files = sorted(dir_path.glob("*.json"))
    records = [load_record(f, strict=strict) for f in files]
    if not records:
        warnings.warn(f"no experiment files found in {dir_path}")
    seen: dict[str, Path] = {}
    for f, rec in zip(files, records):
        if rec.experiment_id in seen:
            raise ValidationError(
                f"duplicate experiment_id '{rec.experiment_id}' in {f} and {seen[rec.experiment_id]}"
            )
        seen[rec.experiment_id] = f
    records.sort(key=lambda r: (r.scenario_id, r.run_index, r.experiment_id))
    return records


def save_record(rec: ExperimentRecord, path: str | Path) -> None:
    Path(path).write_text(json.dumps(record_to_dict(rec), indent=1) + "\n")


def save_dataset(records: list[ExperimentRecord], dir_path: str | Path) -> list[Path]:
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in records:
        path = dir_path / f"{rec.experiment_id}.json"
        save_record(rec, path)
        paths.append(path)
    return paths


# Survey CSV -------------------------------------------------------------------

SURVEY_HEADER = (
    ["experiment_id"]
    + [f"{name}_{suffix}" for name in HM_NAMES for suffix in ("mean", "std")]
    + ["n_responses"]
)


def load_survey(file_path: str | Path) -> SurveyTable:
    """Parse the survey CSV; empty mean/std cells mark a metric as missing."""
    file_path = Path(file_path)
    table = SurveyTable()
    with file_path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != SURVEY_HEADER:
            raise SchemaError(
                f"{file_path}: expected header {','.join(SURVEY_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(SURVEY_HEADER):
                raise SchemaError(
                    f"{file_path}:{lineno}: expected {len(SURVEY_HEADER)} cells, got {len(row)}"
                )
            exp_id = row[0].strip()
            if not exp_id:
                raise SchemaError(f"{file_path}:{lineno}: missing experiment_id")
            entries: dict[str, SurveyEntry] = {}
            for i, name in enumerate(HM_NAMES):
                mean_cell = row[1 + 2 * i].strip()
                std_cell = row[2 + 2 * i].strip()
                if not mean_cell and not std_cell:
                    continue
                if not mean_cell or not std_cell:
                    raise SchemaError(
                        f"{file_path}:{lineno}: '{name}' needs both mean and std or neither"
                    )
                try:
                    entries[name] = SurveyEntry(mean=float(mean_cell), std=float(std_cell))
                except ValidationError as exc:
                    raise ValidationError(f"{file_path}:{lineno}: {exc}") from exc
            try:
                n_responses = int(row[-1])
            except ValueError as exc:
                raise SchemaError(f"{file_path}:{lineno}: bad n_responses '{row[-1]}'") from exc
            try:
                table.add(SurveyRow(experiment_id=exp_id, entries=entries,
                                    n_responses=n_responses))
            except ValidationError as exc:
                raise ValidationError(f"{file_path}:{lineno}: {exc}") from exc
    return table


def save_survey(table: SurveyTable, file_path: str | Path) -> None:
    with Path(file_path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SURVEY_HEADER)
        for exp_id in sorted(table.rows):
            row_obj = table.rows[exp_id]
            cells = [exp_id]
            for name in HM_NAMES:
                entry = row_obj.entries.get(name)
                if entry is None:
                    cells += ["", ""]
                else:
                    cells += [repr(entry.mean), repr(entry.std)]
            cells.append(str(row_obj.n_responses))
            writer.writerow(cells)


# Capture-format adapter --------------------------------------------------------


@dataclass
class AdapterMapping:
    """How to read a third-party capture tree.

    The expected layout is one directory per run containing a robot CSV and one
    CSV per tracked person, e.g.::

        <run_dir>/           # name matches ``run_dir_pattern``
            robot.csv        # columns per ``columns``
            person_1.csv
            ...

    Every knob is overridable from a JSON mapping file, so column names, file
    patterns, angle units, and the scenario/run extraction regex can be adapted
    to whatever the upstream capture pipeline exports.
    """

    robot_file: str = "robot.csv"
    agent_glob: str = "person*.csv"
    columns: dict[str, str] | None = None  # ours -> theirs
    angle_unit: str = "rad"  # "rad" | "deg"
    run_dir_pattern: str = r"(?P<scenario>.+)_run(?P<run>\d+)$"
    scenario_field: str | None = None  # optional meta.json key overriding the regex
    delimiter: str = ","

    def column(self, ours: str) -> str:
        if self.columns and ours in self.columns:
            return self.columns[ours]
        return ours

    @classmethod
    def from_json(cls, path: str | Path) -> "AdapterMapping":
        doc = json.loads(Path(path).read_text())
        allowed = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - allowed
        if unknown:
            raise SchemaError(f"{path}: unknown mapping keys {sorted(unknown)}")
        return cls(**doc)


def _read_capture_csv(path: Path, mapping: AdapterMapping) -> list[dict[str, float]]:
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter=mapping.delimiter)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty capture file")
        fields = list(reader.fieldnames)
        has_theta = mapping.column("theta") in fields
        rows = []
        scale = math.pi / 180.0 if mapping.angle_unit == "deg" else 1.0
        for raw in reader:
            row = {}
            for ours in STATE_FIELDS:
                theirs = mapping.column(ours)
                if theirs not in raw:
                    if ours in ("v_lin", "v_ang", "theta"):
                        row[ours] = 0.0
                        continue
                    raise SchemaError(f"{path}: missing column '{theirs}'")
                row[ours] = float(raw[theirs])
            if has_theta:
                row["theta"] *= scale
            if mapping.column("v_ang") in fields:
                row["v_ang"] *= scale
            rows.append(row)
    if len(rows) < 2:
        raise SchemaError(f"{path}: fewer than 2 samples")
    if not has_theta:
        # derive headings from the direction of travel, holding the last
        # moving direction through stationary stretches
        theta = 0.0
        for a, b in zip(rows, rows[1:]):
            dx, dy = b["x"] - a["x"], b["y"] - a["y"]
            if math.hypot(dx, dy) > 1e-9:
                theta = math.atan2(dy, dx)
                break
        for a, b in zip(rows, rows[1:]):
            dx, dy = b["x"] - a["x"], b["y"] - a["y"]
            if math.hypot(dx, dy) > 1e-9:
                theta = math.atan2(dy, dx)
            a["theta"] = theta
        rows[-1]["theta"] = theta
    return rows


def _traj_from_capture(rows: list[dict[str, float]], subject_id: str, kind: str,
                       t0: float) -> Trajectory:
    states = tuple(
        TimedState(
            t=r["t"] - t0,
            pose=Pose2D(r["x"], r["y"], r["theta"]),
            v_lin=r["v_lin"],
            v_ang=r["v_ang"],
        )
        for r in rows
    )
    return Trajectory(states=states, subject_id=subject_id, subject_kind=kind)


def convert_capture_tree(
    src_dir: str | Path,
    out_dir: str | Path,
    mapping: AdapterMapping | None = None,
) -> list[Path]:
    """Convert a capture tree (one directory per run) into experiment JSON files.

    Timestamps are re-based so each run starts at t=0. Headings missing from
    the capture are derived from consecutive positions.
    """
    mapping = mapping or AdapterMapping()
    src_dir = Path(src_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pattern = re.compile(mapping.run_dir_pattern)

    run_dirs = sorted(d for d in src_dir.iterdir() if d.is_dir())
    if not run_dirs:
        raise SchemaError(f"{src_dir}: no run directories found")

    written = []
    for run_dir in run_dirs:
        match = pattern.match(run_dir.name)
        if not match:
            warnings.warn(f"skipping '{run_dir.name}': does not match run_dir_pattern")
            continue
        scenario = match.group("scenario")
        run_index = int(match.group("run"))

        meta_path = run_dir / "meta.json"
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        if mapping.scenario_field and mapping.scenario_field in meta:
            scenario = str(meta[mapping.scenario_field])

        robot_rows = _read_capture_csv(run_dir / mapping.robot_file, mapping)
        t0 = robot_rows[0]["t"]
        robot = _traj_from_capture(robot_rows, "robot", "robot", t0)

        agents = []
        for agent_path in sorted(run_dir.glob(mapping.agent_glob)):
            rows = _read_capture_csv(agent_path, mapping)
            agents.append(_traj_from_capture(rows, agent_path.stem, "human", t0))

        goal_meta = meta.get("goal")
        if goal_meta:
            goal = Pose2D(float(goal_meta["x"]), float(goal_meta["y"]),
                          float(goal_meta.get("theta", 0.0)))
        else:
            goal = robot.states[-1].pose

        rec = ExperimentRecord(
            experiment_id=f"{scenario}_{run_index:02d}",
            scenario_id=scenario,
            run_index=run_index,
            robot=robot,
            agents=tuple(agents),
            goal=goal,
            map=None,
        )
        path = out_dir / f"{rec.experiment_id}.json"
        save_record(rec, path)
        written.append(path)
    return written
