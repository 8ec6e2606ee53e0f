import copy
from contextlib import contextmanager

import numpy as np
import pytest
import yaml

from hullopt.criteria import Criteria, PenaltyConfig, compute_qois
from hullopt.hull_model import ParameterSpace, Patch, build_demo_model, load_model_spec
from hullopt.pipeline import demo_config_path, load_config
from hullopt.rom.database import SnapshotDatabase
from hullopt.rom.surrogate import surrogate_fit


ACCEPTANCE_LINES: list[str] = []


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title, self.detail = number, title, ""


@contextmanager
def criterion(number: int, title: str):
    """Record one PASS/FAIL line for an acceptance criterion; failures re-raise."""
    c = _Criterion(number, title)
    try:
        yield c
    except BaseException as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        line = f"criterion {number:2d} FAIL  {title}: {msg}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"criterion {number:2d} PASS  {title}: {c.detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def make_space(domains, dens=None, vcgs=None):
    """One patch per parameter; handy for synthetic optimization problems."""
    n = len(domains)
    dens = dens or [1.0] * n
    vcgs = vcgs or [5.0] * n
    patches = [Patch(i, (i,), float(dens[i]), float(vcgs[i]), (i, 0)) for i in range(n)]
    return ParameterSpace.from_groups([(f"p{i}", [i], domains[i], None) for i in range(n)], patches)


def demo_penalty(model):
    cfg = load_config()
    return PenaltyConfig.from_dict(cfg.penalty, model)


def tiny_config_dict(**pipeline):
    """Demo layout on a coarse grid with small budgets, for fast pipeline runs."""
    with open(demo_config_path()) as fh:
        data = yaml.safe_load(fh)
    data = copy.deepcopy(data)
    data["model"]["geometry"]["grid"] = [2, 2]
    data["penalty"].update(y_crit=10, b_crit=40)
    pipe = {
        "seed": 0,
        "initial_samples": 8,
        "max_hifi": 60,
        "rank_tau": 0.01,
        "fit_restarts": 1,
        "moo": {"pop_size": 40, "generations": 2, "infill": 3, "max_rounds": 1, "delta_tol": 0.05},
        "bo": {"max_iters": 8, "time_limit": 600, "candidates": 2, "max_rounds": 1, "beta": 2.0,
               "epsilon": 0.1, "switch_patience": 100, "refit_every": 4},
        "pds": {"max_sweeps": 3, "time_limit": 600, "max_rounds": 1, "variant": "carry"},
        "reparam": {"schedule": [7], "max_clusters": 2, "resample": 4, "trials": 5, "tolerance": 0.5},
    }
    pipe.update(pipeline)
    data["pipeline"] = pipe
    return data


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(tiny_config_dict(), sort_keys=False))
    return path


@pytest.fixture(scope="session")
def demo_model():
    return build_demo_model(load_model_spec(demo_config_path()))


@pytest.fixture(scope="session")
def demo_pen(demo_model):
    return demo_penalty(demo_model)


@pytest.fixture(scope="session")
def demo_criteria(demo_model):
    return Criteria(demo_model)


@pytest.fixture(scope="session")
def demo_db(demo_model, demo_pen, demo_criteria):
    """Default configuration plus 20 random samples, solved with the HF model."""
    sp = demo_model.space
    rng = np.random.default_rng(0)
    db = SnapshotDatabase()
    configs = [demo_model.default_config]
    while len(configs) < 21:
        c = tuple(float(rng.choice(sp.domain(i))) for i in range(sp.n_params))
        if c not in configs:
            configs.append(c)
    for k, c in enumerate(configs):
        s = demo_model.solve_hifi(c)
        q = compute_qois(s, sp, demo_pen, demo_model.monitored_node, demo_criteria)
        db.add(s, q, "initial-sample")
    return db


@pytest.fixture(scope="session")
def demo_surrogate(demo_db, demo_model, demo_criteria):
    return surrogate_fit(demo_db, demo_model.space, demo_criteria, restarts=2, seed=0)
