from __future__ import annotations

import math
from pathlib import Path

import pytest

from socnav_eval.core import ExperimentRecord, Pose2D, TimedState, Trajectory
from socnav_eval.dataset import save_dataset, save_survey
from socnav_eval.synth import corpus_survey, generate_corpus


def straight_traj(start: tuple[float, float], heading: float, speed: float,
                  duration: float, dt: float = 0.05, t0: float = 0.0,
                  subject_id: str = "robot", subject_kind: str = "robot") -> Trajectory:
    """Constant-velocity straight line sampled on a dt grid."""
    n = int(round(duration / dt))
    states = []
    for k in range(n + 1):
        t = t0 + k * dt
        states.append(TimedState(
            t=t,
            pose=Pose2D(start[0] + speed * math.cos(heading) * (t - t0),
                        start[1] + speed * math.sin(heading) * (t - t0),
                        heading),
            v_lin=speed, v_ang=0.0,
        ))
    return Trajectory(states=tuple(states), subject_id=subject_id,
                      subject_kind=subject_kind)


def make_record(robot: Trajectory, agents: tuple[Trajectory, ...] = (),
                experiment_id: str = "exp_r1", scenario_id: str = "exp",
                run_index: int = 1, obstacle_map=None) -> ExperimentRecord:
    end = robot.states[-1]
    return ExperimentRecord(
        experiment_id=experiment_id, scenario_id=scenario_id, run_index=run_index,
        robot=robot, agents=agents,
        goal=Pose2D(end.pose.x, end.pose.y, end.pose.theta), map=obstacle_map,
    )


@pytest.fixture(scope="session")
def corpus_records():
    return generate_corpus()


@pytest.fixture(scope="session")
def corpus_survey_table():
    return corpus_survey()


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory, corpus_records, corpus_survey_table) -> Path:
    """The synthetic corpus saved to disk: JSON runs plus survey.csv."""
    root = tmp_path_factory.mktemp("corpus")
    data = root / "data"
    save_dataset(corpus_records, data)
    save_survey(corpus_survey_table, data / "survey.csv")
    return data
