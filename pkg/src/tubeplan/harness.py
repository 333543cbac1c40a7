"""Closed-loop execution of plans, independent verification, and trace I/O.

A plan leg is executed by re-running the navigation controller toward the
leg's target for *exactly* the leg's scheduled duration (the transition
weight).  Arrival earlier than the schedule becomes a hold at the target;
arrival later than the schedule is a failure.  The stamps of the produced
timed word are therefore the plan's stamps; what execution actually has to
earn is the containment check at each stamp, and that is what the verifier
tests, together with the semantic monitor and the continuous-time safety
counters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .abstraction import Wts
from .controller import navigate
from .dynamics import DisturbanceSpec, derive_seed
from .errors import ExecutionFailure, NoTransition
from .mitl import TimedWord, monitor
from .scenario import Scenario, rational_str
from .synthesis import Plan

DISTURBANCE_CHOICES = {
    "zero": "zero",
    "worst": "worst-case-radial",
    "random": "random-hold",
}

# Loop-closure slack on the tube radius: the controller resets the nominal
# state every sampling step, so the deviation it must absorb per interval is
# one step's worth of disturbance, not the full radius; the second term
# covers integration error at the simulation resolution.
TUBE_REL_SLACK = 1.001


def tube_tolerance(tube_radius: float, sim_dt: float, delta_bound: float) -> float:
    return TUBE_REL_SLACK * tube_radius + 10.0 * sim_dt * delta_bound


@dataclass
class LegRecord:
    source: str
    target: str
    scheduled_steps: int
    physical_arrival_steps: int     # when the stop test first passed
    max_deviation: float
    saturations: int
    offpath_entries: int            # samples inside some third region
    workspace_exits: int


@dataclass
class Trace:
    """Concatenated closed-loop record of a full plan execution."""

    ts: np.ndarray
    states: np.ndarray
    nominal: np.ndarray
    inputs: np.ndarray
    deltas: np.ndarray
    leg_index: np.ndarray
    stamps: tuple                   # scheduled stamps, one per plan state
    plan_states: tuple
    word: TimedWord
    legs: list = field(default_factory=list)
    seed: int = 0
    disturbance: str = "zero"

    @property
    def max_deviation(self) -> float:
        return max((leg.max_deviation for leg in self.legs), default=0.0)

    def sample_at(self, stamp: Fraction) -> int:
        dt = float(self.ts[1] - self.ts[0]) if len(self.ts) > 1 else 1.0
        idx = int(round(float(stamp) / dt))
        return min(idx, len(self.ts) - 1)


def execute_plan(
    scenario: Scenario,
    wts: Wts,
    plan: Plan,
    disturbance: str = "random",
    seed: int = 0,
) -> Trace:
    """Run every leg of the plan on the disturbed system.

    Per-leg disturbance streams are derived from ``seed`` and the leg's
    position in the plan, so the whole run is reproducible and independent
    of how other legs unfolded.
    """
    policy = DISTURBANCE_CHOICES.get(disturbance, disturbance)
    model = scenario.model()
    tube = scenario.tube_params()
    fhocp = scenario.fhocp_params()
    input_set = scenario.input_set()
    h = float(scenario.step)
    substeps = round(h / scenario.sim_dt)

    x = model.embed_position(scenario.regions[plan.states[0]].center)
    ts = [np.zeros(1)]
    xs = [x[None, :]]
    nom = [x[None, :]]
    us = [np.zeros((1, model.n))]
    ds = [np.zeros((1, model.n))]
    leg_ix = [np.zeros(1, dtype=int)]
    legs = []

    def partial() -> Trace:
        return _assemble(scenario, plan, ts, xs, nom, us, ds, leg_ix, legs,
                         seed, disturbance)

    t_offset = 0.0
    for i, (src, dst, weight) in enumerate(plan.legs()):
        try:
            tr = wts.transitions[(src, dst)]
        except KeyError:
            raise ExecutionFailure(
                f"plan leg {src!r} -> {dst!r} has no transition", partial()
            ) from None
        if tr.descriptor is not None:
            steps = tr.descriptor.weight_steps
        else:
            steps = int(weight / scenario.step)
        spec = DisturbanceSpec(scenario.disturbance_bound, policy)
        outcome = navigate(
            model,
            x,
            scenario.regions[dst],
            scenario.state_constraints_for(src, dst),
            input_set,
            tube,
            fhocp,
            spec,
            t_max=steps * h,
            seed=derive_seed(seed, i, src, dst),
            settle_steps=0,
            min_duration_steps=steps,
            sim_dt=scenario.sim_dt,
        )
        if not outcome.arrived:
            legs.append(LegRecord(src, dst, steps,
                                  outcome.arrival_steps or -1,
                                  outcome.max_deviation,
                                  outcome.saturation_count,
                                  outcome.obstacle_violations,
                                  outcome.workspace_violations))
            raise ExecutionFailure(
                f"leg {i} ({src!r} -> {dst!r}) ended {outcome.status} after "
                f"{outcome.total_steps} of {steps} scheduled steps",
                partial(),
            )
        legs.append(LegRecord(src, dst, steps, outcome.arrival_steps,
                              outcome.max_deviation, outcome.saturation_count,
                              outcome.obstacle_violations,
                              outcome.workspace_violations))
        ts.append(outcome.ts[1:] + t_offset)
        xs.append(outcome.states[1:])
        nom.append(outcome.nominal_states[1:])
        us.append(outcome.inputs[1:])
        ds.append(outcome.disturbances[1:])
        leg_ix.append(np.full(len(outcome.ts) - 1, i, dtype=int))
        x = outcome.states[-1].copy()
        t_offset += steps * h

    return _assemble(scenario, plan, ts, xs, nom, us, ds, leg_ix, legs,
                     seed, disturbance)


def _assemble(scenario, plan, ts, xs, nom, us, ds, leg_ix, legs, seed,
              disturbance) -> Trace:
    n_done = len(legs) + 1 if len(legs) + 1 <= len(plan.states) else len(plan.states)
    word_states = plan.states[:max(n_done, 1)]
    word = TimedWord(
        tuple(scenario.label_of(s) for s in word_states),
        plan.stamps[:len(word_states)],
    )
    return Trace(
        ts=np.concatenate(ts),
        states=np.concatenate(xs),
        nominal=np.concatenate(nom),
        inputs=np.concatenate(us),
        deltas=np.concatenate(ds),
        leg_index=np.concatenate(leg_ix),
        stamps=plan.stamps[:len(word_states)],
        plan_states=word_states,
        word=word,
        legs=list(legs),
        seed=seed,
        disturbance=disturbance,
    )


def verify_trace(scenario: Scenario, plan: Plan, trace: Trace, formula=None) -> dict:
    """Independent pass/fail report for an executed trace.

    Checks, in order: the robot body sits inside the scheduled region at
    every stamp; the semantic monitor accepts the produced timed word; the
    continuous trajectory never grazes a third region or leaves the
    workspace; the applied inputs respect their bounds; and the deviation
    from the nominal trajectory stays within the tube tolerance.
    """
    if formula is None:
        formula = scenario.formula()
    tube = scenario.tube_params()
    eta = scenario.robot_radius

    containment = []
    for state, stamp in zip(trace.plan_states, trace.stamps):
        ball = scenario.regions[state]
        idx = trace.sample_at(stamp)
        pos = scenario.model().position(trace.states[idx])
        margin = (ball.radius - eta) - float(np.linalg.norm(pos - ball.center))
        containment.append({
            "state": state,
            "stamp": rational_str(stamp),
            "margin": margin,
            "ok": margin >= -1e-9,
        })
    containment_ok = all(c["ok"] for c in containment)

    complete = len(trace.plan_states) == len(plan.states)
    monitor_ok = complete and monitor(formula, trace.word)

    offpath = int(sum(leg.offpath_entries for leg in trace.legs))
    exits = int(sum(leg.workspace_exits for leg in trace.legs))
    saturations = int(sum(leg.saturations for leg in trace.legs))

    u_set = scenario.input_set()
    from .controller import input_violation

    input_bad = int(sum(1 for u in trace.inputs if input_violation(u, u_set)))

    tol = tube_tolerance(tube.tube_radius, scenario.sim_dt,
                         scenario.disturbance_bound)
    tube_ok = trace.max_deviation <= tol

    report = {
        "pass": bool(containment_ok and monitor_ok and offpath == 0
                     and exits == 0 and input_bad == 0 and tube_ok),
        "complete": complete,
        "containment": containment,
        "containment_ok": containment_ok,
        "monitor_ok": bool(monitor_ok),
        "offpath_entries": offpath,
        "workspace_exits": exits,
        "input_violations": input_bad,
        "saturations": saturations,
        "max_deviation": trace.max_deviation,
        "tube_tolerance": tol,
        "tube_ok": bool(tube_ok),
    }
    return report


# ---------------------------------------------------------------------------
# trace files
# ---------------------------------------------------------------------------

def _meta_dict(trace: Trace) -> dict:
    return {
        "stamps": [rational_str(t) for t in trace.stamps],
        "plan_states": list(trace.plan_states),
        "seed": trace.seed,
        "disturbance": trace.disturbance,
        "legs": [
            {
                "source": leg.source,
                "target": leg.target,
                "scheduled_steps": leg.scheduled_steps,
                "physical_arrival_steps": leg.physical_arrival_steps,
                "max_deviation": leg.max_deviation,
                "saturations": leg.saturations,
                "offpath_entries": leg.offpath_entries,
                "workspace_exits": leg.workspace_exits,
            }
            for leg in trace.legs
        ],
    }


def export_trace(trace: Trace, path) -> None:
    """Tab-separated samples with a JSON metadata comment line on top."""
    n = trace.states.shape[1]
    cols = (["t"] + [f"x{i}" for i in range(n)] + [f"xhat{i}" for i in range(n)]
            + [f"u{i}" for i in range(n)] + [f"delta{i}" for i in range(n)]
            + ["leg"])
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(_meta_dict(trace), sort_keys=True,
                                   separators=(",", ":")) + "\n")
        fh.write("\t".join(cols) + "\n")
        for k in range(len(trace.ts)):
            row = np.concatenate([[trace.ts[k]], trace.states[k],
                                  trace.nominal[k], trace.inputs[k],
                                  trace.deltas[k]])
            fh.write("\t".join(f"{v:.17g}" for v in row))
            fh.write(f"\t{int(trace.leg_index[k])}\n")


def import_trace(path) -> Trace:
    with open(path) as fh:
        meta = json.loads(fh.readline().lstrip("# ").strip())
        fh.readline()  # column header
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row[:-1]] for row in rows])
    leg_ix = np.array([int(row[-1]) for row in rows], dtype=int)
    n = (data.shape[1] - 1) // 4
    stamps = tuple(Fraction(s) for s in meta["stamps"])
    plan_states = tuple(meta["plan_states"])
    legs = [LegRecord(**d) for d in meta["legs"]]
    word = TimedWord(tuple(frozenset() for _ in plan_states), stamps)
    trace = Trace(
        ts=data[:, 0],
        states=data[:, 1:1 + n],
        nominal=data[:, 1 + n:1 + 2 * n],
        inputs=data[:, 1 + 2 * n:1 + 3 * n],
        deltas=data[:, 1 + 3 * n:1 + 4 * n],
        leg_index=leg_ix,
        stamps=stamps,
        plan_states=plan_states,
        word=word,
        legs=legs,
        seed=meta["seed"],
        disturbance=meta["disturbance"],
    )
    return trace


def rebuild_word(scenario: Scenario, trace: Trace) -> TimedWord:
    """Recompute the timed word from region labels (after an import)."""
    return TimedWord(
        tuple(scenario.label_of(s) for s in trace.plan_states), trace.stamps
    )


# ---------------------------------------------------------------------------
# plot data
# ---------------------------------------------------------------------------

def export_plot_data(scenario: Scenario, trace: Trace, outdir) -> list:
    """Plain numeric series for external plotting; returns written paths."""
    import os

    os.makedirs(outdir, exist_ok=True)
    written = []

    def table(name, header, rows):
        path = os.path.join(outdir, name)
        with open(path, "w") as fh:
            fh.write("\t".join(header) + "\n")
            for row in rows:
                fh.write("\t".join(
                    v if isinstance(v, str) else f"{v:.17g}" for v in row
                ) + "\n")
        written.append(path)

    model = scenario.model()
    pos = model.position(trace.states)
    nom = model.position(trace.nominal)
    table("path.tsv", ["t", "px", "py", "nom_px", "nom_py", "leg"],
          [(trace.ts[k], pos[k, 0], pos[k, 1], nom[k, 0], nom[k, 1],
            str(int(trace.leg_index[k]))) for k in range(len(trace.ts))])
    table("regions.tsv", ["name", "cx", "cy", "radius", "labels"],
          [(name, ball.center[0], ball.center[1], ball.radius,
            ",".join(sorted(scenario.label_of(name))))
           for name, ball in sorted(scenario.regions.items())])
    dev = np.linalg.norm(trace.states - trace.nominal, axis=1)
    table("deviation.tsv", ["t", "deviation"],
          [(trace.ts[k], dev[k]) for k in range(len(trace.ts))])
    table("inputs.tsv", ["t"] + [f"u{i}" for i in range(model.n)],
          [tuple(np.concatenate([[trace.ts[k]], trace.inputs[k]]))
           for k in range(len(trace.ts))])
    table("stamps.tsv", ["stamp", "state", "labels"],
          [(float(s), name, ",".join(sorted(scenario.label_of(name))))
           for s, name in zip(trace.stamps, trace.plan_states)])
    table("legs.tsv", ["index", "source", "target", "scheduled_steps",
                       "physical_arrival_steps", "max_deviation"],
          [(str(i), leg.source, leg.target, str(leg.scheduled_steps),
            str(leg.physical_arrival_steps), leg.max_deviation)
           for i, leg in enumerate(trace.legs)])
    return written
