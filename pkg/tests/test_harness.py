from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from tubeplan.abstraction import Wts, WtsTransition
from tubeplan.errors import ExecutionFailure
from tubeplan.harness import (
    execute_plan,
    export_plot_data,
    export_trace,
    import_trace,
    rebuild_word,
    tube_tolerance,
    verify_trace,
)
from tubeplan.synthesis import Plan, synthesize

F = Fraction


@pytest.fixture(scope="module")
def tiny_plan(tiny_scenario, tiny_wts):
    return synthesize(tiny_wts, tiny_scenario.formula(),
                      formula_text=tiny_scenario.formula_text)


@pytest.fixture(scope="module")
def tiny_trace(tiny_scenario, tiny_wts, tiny_plan):
    return execute_plan(tiny_scenario, tiny_wts, tiny_plan,
                        disturbance="random", seed=7)


def test_executed_stamps_are_the_scheduled_stamps(tiny_plan, tiny_trace):
    assert tiny_trace.stamps == tiny_plan.stamps
    assert tiny_trace.plan_states == tiny_plan.states
    assert tiny_trace.ts[-1] == pytest.approx(float(tiny_plan.stamps[-1]))
    # sample count: one initial sample plus one per simulation substep
    assert len(tiny_trace.ts) == round(float(tiny_plan.stamps[-1]) / 0.01) + 1


def test_verifier_passes_under_random_disturbance(tiny_scenario, tiny_plan,
                                                  tiny_trace):
    report = verify_trace(tiny_scenario, tiny_plan, tiny_trace)
    assert report["pass"]
    assert report["complete"]
    assert report["monitor_ok"]
    assert report["offpath_entries"] == 0
    assert report["workspace_exits"] == 0
    assert report["input_violations"] == 0
    assert all(c["margin"] >= 0 for c in report["containment"])
    assert report["max_deviation"] <= report["tube_tolerance"]


def test_same_seed_reproduces_the_trace(tiny_scenario, tiny_wts, tiny_plan,
                                        tiny_trace):
    again = execute_plan(tiny_scenario, tiny_wts, tiny_plan,
                         disturbance="random", seed=7)
    assert np.array_equal(again.states, tiny_trace.states)
    assert np.array_equal(again.inputs, tiny_trace.inputs)
    assert np.array_equal(again.deltas, tiny_trace.deltas)
    other = execute_plan(tiny_scenario, tiny_wts, tiny_plan,
                         disturbance="random", seed=8)
    assert not np.array_equal(other.deltas, tiny_trace.deltas)


def test_zero_disturbance_is_noise_free(tiny_scenario, tiny_wts, tiny_plan):
    trace = execute_plan(tiny_scenario, tiny_wts, tiny_plan,
                         disturbance="zero", seed=0)
    assert np.all(trace.deltas == 0)
    report = verify_trace(tiny_scenario, tiny_plan, trace)
    assert report["pass"]


def test_trace_export_import_round_trip(tiny_scenario, tiny_trace, tmp_path):
    path = tmp_path / "trace.tsv"
    export_trace(tiny_trace, path)
    loaded = import_trace(path)
    assert np.array_equal(loaded.states, tiny_trace.states)
    assert np.array_equal(loaded.ts, tiny_trace.ts)
    assert loaded.stamps == tiny_trace.stamps
    assert loaded.plan_states == tiny_trace.plan_states
    assert loaded.legs == tiny_trace.legs
    # imported words carry empty letters until rebuilt from the scenario
    assert rebuild_word(tiny_scenario, loaded) == tiny_trace.word
    again = tmp_path / "again.tsv"
    export_trace(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_plot_data_files(tiny_scenario, tiny_trace, tmp_path):
    written = export_plot_data(tiny_scenario, tiny_trace, tmp_path / "plots")
    names = sorted(p.split("/")[-1] for p in written)
    assert names == ["deviation.tsv", "inputs.tsv", "legs.tsv", "path.tsv",
                     "regions.tsv", "stamps.tsv"]
    with open(written[0]) as fh:
        header = fh.readline().split("\t")
        assert header[0] == "t"
        assert len(fh.readlines()) == len(tiny_trace.ts)


def test_missing_transition_fails_with_partial_trace(tiny_scenario, tiny_wts):
    plan = Plan(states=("A", "Z"), stamps=(F(0), F(1)), prefix_len=2)
    with pytest.raises(ExecutionFailure) as err:
        execute_plan(tiny_scenario, tiny_wts, plan, disturbance="zero")
    partial = err.value.partial_trace
    assert partial is not None
    assert partial.plan_states == ("A",)
    assert len(partial.ts) == 1


def test_impossible_schedule_fails_with_partial_trace(tiny_scenario, tiny_wts):
    # shrink the A -> B schedule to one sampling step so the leg times out
    tr = tiny_wts.transitions[("A", "B")]
    squeezed = dict(tiny_wts.transitions)
    squeezed[("A", "B")] = WtsTransition(
        F(1, 10), replace(tr.descriptor, arrival_steps=1, weight_steps=1)
    )
    wts = Wts(tiny_wts.states, tiny_wts.initial, tiny_wts.labels, squeezed,
              tiny_wts.scenario_hash)
    plan = Plan(states=("A", "B"), stamps=(F(0), F(1, 10)), prefix_len=2)
    with pytest.raises(ExecutionFailure) as err:
        execute_plan(tiny_scenario, wts, plan, disturbance="zero")
    partial = err.value.partial_trace
    assert partial is not None
    assert len(partial.legs) == 1
    assert partial.legs[0].physical_arrival_steps == -1


def test_tube_tolerance_formula():
    assert tube_tolerance(0.05, 0.01, 0.05) == pytest.approx(0.05505)
    assert tube_tolerance(0.0, 0.01, 0.0) == 0.0
