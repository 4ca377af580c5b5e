"""Self-coordinating refrigerated engine system under cyber-physical attack.

A single engine couples a controller and an intrusion detector over a shared
data space.  The controller activates the coolant for five consecutive
instants when the (possibly tampered) temperature channel reads at or above
``threshold``; the detector raises a warning whenever the genuine temperature
exceeds ``max_temp`` while the coolant is off, slows its own engine down and
asks the other engine to run at full speed.  The environment moves the
temperature by a uniform delta whose interval depends on the coolant and
speed actuators, shifts a six-step temperature history, accumulates stress
while more than three of the last six readings are at or above ``max_temp``,
and maintains running false-negative / false-positive averages.

Symbolic values encode as reals: off=0 on=1; slow=0 half=1 full=2;
ok=0 hot=1; alarm none=0 left=1 right=2 both=3.

Attacks are processes composed in parallel to the right of the system, so
their writes override the controller's:

* ``act``   turns the coolant off as soon as the temperature drops below
            max_temp - AC (stealthy: it acts only while temp < max_temp);
* ``sen``   adds a constant negative offset -TF to the temperature channel;
* ``saw``   applies the sensor offset only while the step counter lies in a
            window [left, right] copied from the initial data state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataspace import (
    DataSpace,
    PenaltyFunction,
    RatioPenalty,
    VarPenalty,
    VarSpec,
)
from ..engine import Configuration
from ..environment import EnvironmentEvolution, register_environment
from ..errors import DataValidationError, PreconditionError, StructuralError
from ..process import Call, Const, If, Op, Prefix, Process, SyncPar, Var, tick
from ..rng import UniformTape
from ..robustness import PerturbationSampler

__all__ = [
    "EngineParams",
    "AttackConfig",
    "EngineEnv",
    "engine_space",
    "engine_system",
    "engine_penalties",
    "engine_manifest",
    "WindowPenalty",
    "SawWindowSampler",
]

OFF, ON = 0.0, 1.0
SLOW, HALF, FULL = 0.0, 1.0, 2.0
OK, HOT = 0.0, 1.0
NONE, LEFT, RIGHT, BOTH = 0.0, 1.0, 2.0, 3.0

_COUNTER_MAX = 1e15


@dataclass(frozen=True)
class EngineParams:
    max_temp: float = 100.0
    stress_incr: float = 0.02
    threshold: float = 99.8
    clearance: float = 0.7  # security clearance weight of each engine

    def __post_init__(self):
        if self.threshold > self.max_temp:
            raise DataValidationError("threshold must not exceed max_temp")
        if self.stress_incr <= 0:
            raise DataValidationError("stress_incr must be positive")


@dataclass(frozen=True)
class AttackConfig:
    """One attack instance: kind in {act, sen, saw}, side in {L, R}."""

    kind: str
    side: str
    ac: float | None = None
    tf: float | None = None
    awml: int | None = None

    def __post_init__(self):
        if self.kind not in ("act", "sen", "saw"):
            raise DataValidationError(f"unknown attack kind {self.kind!r}")
        if self.side not in ("L", "R"):
            raise DataValidationError(f"unknown engine side {self.side!r}")
        if self.kind == "act":
            if self.ac is None or not (1.0 <= self.ac <= 3.0):
                raise DataValidationError("act attack needs ac in [1.0, 3.0]")
        else:
            if self.tf is None or self.tf <= 0:
                raise DataValidationError(f"{self.kind} attack needs tf > 0")
        if self.kind == "saw":
            if self.awml is None or self.awml < 1:
                raise DataValidationError("saw attack needs awml >= 1")

    @property
    def written_vars(self) -> frozenset:
        s = self.side
        if self.kind == "act":
            return frozenset({f"cool_{s}"})
        if self.kind == "sen":
            return frozenset({f"temp_fake_{s}"})
        return frozenset({f"temp_fake_{s}", f"aw_l_{s}", f"aw_r_{s}"})

    @classmethod
    def parse(cls, text: str) -> "AttackConfig":
        """Parse 'act:L:1.8', 'sen:R:0.4', or 'saw:L:0.4:1000'."""
        parts = text.split(":")
        if len(parts) < 3:
            raise DataValidationError(f"cannot parse attack {text!r}")
        kind, side = parts[0], parts[1]
        if kind == "act":
            return cls(kind, side, ac=float(parts[2]))
        if kind == "sen":
            return cls(kind, side, tf=float(parts[2]))
        if kind == "saw":
            if len(parts) != 4:
                raise DataValidationError("saw attack needs 'saw:SIDE:TF:AWML'")
            return cls(kind, side, tf=float(parts[2]), awml=int(parts[3]))
        raise DataValidationError(f"unknown attack kind {kind!r}")


_SIDE_VARS = (
    "temp", "cool", "speed", "ch_speed", "stress",
    "p1", "p2", "p3", "p4", "p5", "p6",
    "temp_fake", "ch_warning", "fn", "fp", "sc",
    "left", "right", "aw_l", "aw_r",
)


def _sv(base: str, side: str) -> str:
    return f"{base}_{side}"


def engine_space(dual: bool = False) -> DataSpace:
    sides = ("L", "R") if dual else ("L",)
    specs: list[VarSpec] = []
    for s in sides:
        specs += [
            VarSpec(_sv("temp", s), -50.0, 500.0),
            VarSpec(_sv("cool", s), 0.0, 1.0, values=(0.0, 1.0)),
            VarSpec(_sv("speed", s), 0.0, 2.0, values=(0.0, 1.0, 2.0)),
            VarSpec(_sv("ch_speed", s), 0.0, 2.0, values=(0.0, 1.0, 2.0)),
            VarSpec(_sv("stress", s), 0.0, 1.0),
        ]
        specs += [VarSpec(_sv(f"p{k}", s), -50.0, 500.0) for k in range(1, 7)]
        specs += [
            VarSpec(_sv("temp_fake", s), -10.0, 10.0),
            VarSpec(_sv("ch_warning", s), 0.0, 1.0, values=(0.0, 1.0)),
            VarSpec(_sv("fn", s), 0.0, 1.0),
            VarSpec(_sv("fp", s), 0.0, 1.0),
            VarSpec(_sv("sc", s), 0.0, _COUNTER_MAX),
            VarSpec(_sv("left", s), 0.0, _COUNTER_MAX),
            VarSpec(_sv("right", s), 0.0, _COUNTER_MAX),
            VarSpec(_sv("aw_l", s), 0.0, _COUNTER_MAX),
            VarSpec(_sv("aw_r", s), 0.0, _COUNTER_MAX),
        ]
    specs += [
        VarSpec("ch_speed_L_to_R", 0.0, 2.0, values=(0.0, 1.0, 2.0)),
        VarSpec("ch_speed_R_to_L", 0.0, 2.0, values=(0.0, 1.0, 2.0)),
        VarSpec("cs", 0.0, _COUNTER_MAX),
    ]
    if dual:
        specs += [
            VarSpec("ch_alarm", 0.0, 3.0, values=(0.0, 1.0, 2.0, 3.0)),
            VarSpec("fn", 0.0, 1.0),
            VarSpec("fp", 0.0, 1.0),
        ]
    return DataSpace(specs)


def _engine_defs(side: str, params: EngineParams) -> dict:
    s = side
    ch_in = "ch_speed_R_to_L" if s == "L" else "ch_speed_L_to_R"
    ch_out = "ch_speed_L_to_R" if s == "L" else "ch_speed_R_to_L"
    ctrl, cooling, check, ids = (f"Ctrl_{s}", f"Cooling_{s}", f"Check_{s}", f"IDS_{s}")

    # the controller reads the temperature through an insecure channel:
    # its guard sees temp + temp_fake, the detector reads the genuine temp
    ch_temp = Op("+", (Var(_sv("temp", s)), Var(_sv("temp_fake", s))))
    defs = {
        ctrl: If(
            Op("<", (ch_temp, Const(params.threshold))),
            tick(Call(check)),
            Prefix((Const(ON),), (_sv("cool", s),), Call(cooling)),
        ),
        cooling: tick(tick(tick(tick(Call(check))))),
        check: If(
            Op("=", (Var(_sv("ch_speed", s)), Const(SLOW))),
            Prefix((Const(SLOW), Const(OFF)), (_sv("speed", s), _sv("cool", s)), Call(ctrl)),
            Prefix((Var(ch_in), Const(OFF)), (_sv("speed", s), _sv("cool", s)), Call(ctrl)),
        ),
        ids: If(
            Op("and", (
                Op(">", (Var(_sv("temp", s)), Const(params.max_temp))),
                Op("=", (Var(_sv("cool", s)), Const(OFF))),
            )),
            Prefix(
                (Const(HOT), Const(SLOW), Const(FULL)),
                (_sv("ch_warning", s), _sv("ch_speed", s), ch_out),
                Call(ids),
            ),
            Prefix(
                (Const(OK), Const(HALF), Const(HALF)),
                (_sv("ch_warning", s), _sv("ch_speed", s), ch_out),
                Call(ids),
            ),
        ),
        f"Eng_{s}": SyncPar(Call(ctrl), Call(ids)),
    }
    return defs


def _supervisor_def() -> dict:
    warn = lambda s: Op("=", (Var(_sv("ch_warning", s)), Const(HOT)))
    alarm = lambda v: Prefix((Const(v),), ("ch_alarm",), Call("SV"))
    return {
        "SV": If(
            Op("and", (warn("L"), warn("R"))),
            alarm(BOTH),
            If(warn("L"), alarm(LEFT), If(warn("R"), alarm(RIGHT), alarm(NONE))),
        )
    }


def _attack_defs(att: AttackConfig, params: EngineParams) -> tuple[str, dict]:
    s = att.side
    if att.kind == "act":
        name = f"Att_Act_{s}"
        body = If(
            Op("<", (Var(_sv("temp", s)), Const(params.max_temp - att.ac))),
            Prefix((Const(OFF),), (_sv("cool", s),), Call(name)),
            tick(Call(name)),
        )
        return name, {name: body}
    if att.kind == "sen":
        name = f"Att_Sen_{s}"
        body = Prefix((Const(-att.tf),), (_sv("temp_fake", s),), Call(name))
        return name, {name: body}
    name = f"Att_Saw_{s}"
    run = f"Att_Saw_run_{s}"
    window = Op("and", (
        Op("<=", (Var(_sv("aw_l", s)), Var("cs"))),
        Op("<=", (Var("cs"), Var(_sv("aw_r", s)))),
    ))
    return name, {
        name: Prefix(
            (Var(_sv("left", s)), Var(_sv("right", s))),
            (_sv("aw_l", s), _sv("aw_r", s)),
            Call(run),
        ),
        run: If(
            window,
            Prefix((Const(-att.tf),), (_sv("temp_fake", s),), Call(run)),
            Prefix((Const(0.0),), (_sv("temp_fake", s),), Call(run)),
        ),
    }


def _initial_values(dual: bool) -> dict:
    sides = ("L", "R") if dual else ("L",)
    init: dict = {}
    for s in sides:
        init.update({
            _sv("temp", s): 95.0, _sv("cool", s): OFF, _sv("speed", s): HALF,
            _sv("ch_speed", s): HALF, _sv("stress", s): 0.0,
            _sv("temp_fake", s): 0.0, _sv("ch_warning", s): OK,
            _sv("fn", s): 0.0, _sv("fp", s): 0.0, _sv("sc", s): 0.0,
            _sv("left", s): 0.0, _sv("right", s): 0.0,
            _sv("aw_l", s): 0.0, _sv("aw_r", s): 0.0,
        })
        init.update({_sv(f"p{k}", s): 95.0 for k in range(1, 7)})
    init.update({"ch_speed_L_to_R": HALF, "ch_speed_R_to_L": HALF, "cs": 0.0})
    if dual:
        init.update({"ch_alarm": NONE, "fn": 0.0, "fp": 0.0})
    return init


def engine_system(
    params: EngineParams | None = None,
    attacks: tuple[AttackConfig, ...] = (),
    dual: bool = False,
    init: dict | None = None,
) -> Configuration:
    """Assemble the engine configuration, optionally under attack.

    Attacks must target distinct (kind, side) pairs and must not write the
    same variables as each other; the deliberate overlap between an actuator
    attack and the controller (both write the coolant) is tolerated, with
    the attack composed rightmost so its write wins.
    """
    params = params or EngineParams()
    attacks = tuple(attacks)
    if len({(a.kind, a.side) for a in attacks}) != len(attacks):
        raise PreconditionError("attacks must target distinct (kind, side) pairs")
    for i, a in enumerate(attacks):
        if not dual and a.side != "L":
            raise PreconditionError("single-engine system only has side L")
        for b in attacks[i + 1:]:
            overlap = a.written_vars & b.written_vars
            if overlap:
                raise PreconditionError(
                    f"attacks {a.kind}:{a.side} and {b.kind}:{b.side} both write {sorted(overlap)}"
                )

    defs = _engine_defs("L", params)
    process: Process = Call("Eng_L")
    if dual:
        defs.update(_engine_defs("R", params))
        defs.update(_supervisor_def())
        process = SyncPar(SyncPar(Call("Eng_L"), Call("Eng_R")), Call("SV"))
    for att in attacks:
        name, att_defs = _attack_defs(att, params)
        defs.update(att_defs)
        process = SyncPar(process, Call(name))

    space = engine_space(dual)
    values = _initial_values(dual)
    if init:
        unknown = [n for n in init if n not in values]
        if unknown:
            raise StructuralError(f"unknown initial-state variables {unknown}")
        values.update(init)
    data = space.state(values)
    env = EngineEnv(params, dual)
    lockstep = EngineLockstep(params, attacks, dual, process, tuple(sorted(defs.items())))
    cfg = Configuration(process, data, env, defs, lockstep)
    # actuator attacks share the coolant variable with the controller by design
    return cfg.validated(tolerate_write_overlap=True)


class EngineEnv(EnvironmentEvolution):
    """Temperature drift, history shift, stress accumulation, step counting,
    and false-negative / false-positive running averages."""

    id = "engine"

    def __init__(self, params: EngineParams, dual: bool = False):
        self.params = params
        self.dual = dual
        self.space = engine_space(dual)
        ix = self.space.index
        self.sides = ("L", "R") if dual else ("L",)
        self._side_ix = {
            s: {name: ix(_sv(name, s)) for name in _SIDE_VARS} for s in self.sides
        }
        self._cs = ix("cs")
        if dual:
            self._alarm = ix("ch_alarm")
            self._fn = ix("fn")
            self._fp = ix("fp")

    def __eq__(self, other):
        return (
            isinstance(other, EngineEnv)
            and self.params == other.params
            and self.dual == other.dual
        )

    def __hash__(self):
        return hash((self.params, self.dual))

    def sample_values(self, values, rng):
        p = self.params
        out = list(values)
        cs = values[self._cs]
        for s in self.sides:
            ix = self._side_ix[s]
            temp = values[ix["temp"]]
            cool = values[ix["cool"]]
            speed = values[ix["speed"]]
            if cool == ON:
                lo_d, hi_d = -1.2, -0.8
            elif speed == SLOW:
                lo_d, hi_d = 0.1, 0.3
            elif speed == HALF:
                lo_d, hi_d = 0.3, 0.7
            else:
                lo_d, hi_d = 0.7, 1.2
            out[ix["temp"]] = temp + rng.uniform(lo_d, hi_d)

            ps = [values[ix[f"p{k}"]] for k in range(1, 7)]
            out[ix["p1"]] = temp
            for k in range(2, 7):
                out[ix[f"p{k}"]] = ps[k - 2]

            hot_count = sum(1 for v in ps if v >= p.max_temp)
            stress = values[ix["stress"]]
            if hot_count > 3:
                out[ix["stress"]] = min(1.0, stress + p.stress_incr)
                out[ix["sc"]] = values[ix["sc"]] + 1.0

            warn = values[ix["ch_warning"]]
            out[ix["fn"]] = (cs * values[ix["fn"]] + max(0.0, stress - warn)) / (cs + 1.0)
            out[ix["fp"]] = (cs * values[ix["fp"]] + max(0.0, warn - stress)) / (cs + 1.0)

        if self.dual:
            alarm = values[self._alarm]
            al = 1.0 if alarm in (LEFT, BOTH) else 0.0
            ar = 1.0 if alarm in (RIGHT, BOTH) else 0.0
            sl = values[self._side_ix["L"]["stress"]]
            sr = values[self._side_ix["R"]["stress"]]
            w = self.params.clearance
            inc_fn = min(1.0, w * max(0.0, sl - al) + w * max(0.0, sr - ar))
            inc_fp = min(1.0, w * max(0.0, al - sl) + w * max(0.0, ar - sr))
            out[self._fn] = (cs * values[self._fn] + inc_fn) / (cs + 1.0)
            out[self._fp] = (cs * values[self._fp] + inc_fp) / (cs + 1.0)

        out[self._cs] = cs + 1.0
        return out


@dataclass(frozen=True)
class WindowPenalty(PenaltyFunction):
    """Attack-window length relative to its maximum: (right - left) / awml."""

    left_var: str
    right_var: str
    awml: int
    id: str = ""

    def __post_init__(self):
        if not self.id:
            object.__setattr__(self, "id", f"window[{self.right_var}]")

    def raw(self, step, values, space):
        return (values[space.index(self.right_var)] - values[space.index(self.left_var)]) / self.awml

    def eval_batch(self, step, values, space):
        span = values[:, space.index(self.right_var)] - values[:, space.index(self.left_var)]
        return np.clip(span / self.awml, 0.0, 1.0)


@dataclass(frozen=True)
class SawWindowSampler(PerturbationSampler):
    """Perturbs the initial state with a random attack window [0, aw].

    ``aw`` is drawn uniformly over the integers 0..awml; combined with the
    window-length penalty filter this realises a uniform draw over admissible
    window lengths.
    """

    side: str = "L"
    awml: int = 1000
    id: str = "saw-window"

    def sample(self, base, rng):
        aw = float(rng.uniform_int(0, self.awml))
        return base.update([(_sv("left", self.side), 0.0), (_sv("right", self.side), aw)])


def engine_penalties(dual: bool = False, awml: int = 1000) -> dict[str, PenaltyFunction]:
    out: dict[str, PenaltyFunction] = {}
    for s in ("L", "R") if dual else ("L",):
        out[f"fn_{s}"] = VarPenalty(_sv("fn", s), id=f"fn_{s}")
        out[f"fp_{s}"] = VarPenalty(_sv("fp", s), id=f"fp_{s}")
        out[f"stress_{s}"] = VarPenalty(_sv("stress", s), id=f"stress_{s}")
        out[f"overstress_{s}"] = RatioPenalty(_sv("sc", s), "cs", id=f"overstress_{s}")
        out[f"window_{s}"] = WindowPenalty(_sv("left", s), _sv("right", s), awml)
    if dual:
        out["fn"] = VarPenalty("fn", id="fn")
        out["fp"] = VarPenalty("fp", id="fp")
    return out


def engine_manifest(params: EngineParams, dual: bool = False) -> dict:
    space = engine_space(dual)
    return {
        "model": "engine",
        "variables": [
            {
                "name": v.name, "lower": v.lower, "upper": v.upper,
                "kind": "finite" if v.is_finite else "continuous",
            }
            for v in space.vars
        ],
        "encodings": {
            "cool": {"off": 0, "on": 1},
            "speed": {"slow": 0, "half": 1, "full": 2},
            "ch_warning": {"ok": 0, "hot": 1},
            "ch_alarm": {"none": 0, "left": 1, "right": 2, "both": 3},
        },
        "initial_state": _initial_values(dual),
        "penalties": sorted(engine_penalties(dual)),
        "params": {
            "max_temp": params.max_temp, "stress_incr": params.stress_incr,
            "threshold": params.threshold, "dual": dual,
        },
    }


# ---------------------------------------------------------------------------
# Vectorized lockstep simulator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EngineLockstep:
    """Per-run automaton for the controller phase; everything else is a pure
    function of the current values.  One uniform per engine side per step."""

    params: EngineParams
    attacks: tuple
    dual: bool
    expected_process: Process
    expected_defs: tuple = ()  # sorted (name, body) pairs of the bound system

    def start(self, c: Configuration, n_runs: int, base_key, run_offset: int):
        defs_now = tuple(sorted(c.defs.items()))
        if c.process != self.expected_process or defs_now != self.expected_defs:
            raise PreconditionError(
                "lockstep simulator is bound to the initial engine process"
            )
        return _EngineRun(self, np.asarray(c.data.values, dtype=np.float64),
                          n_runs, base_key, run_offset)


class _EngineRun:
    # controller phases: 0 read-guard, 1..4 cooling ticks, 5 check
    def __init__(self, cfg: EngineLockstep, init: np.ndarray, n: int, base_key, run_offset):
        self.cfg = cfg
        self.p = cfg.params
        self.sides = ("L", "R") if cfg.dual else ("L",)
        self.space = engine_space(cfg.dual)
        self.ix = {name: i for i, name in enumerate(self.space.names)}
        self.vals = np.tile(init, (n, 1))
        self.phase = {s: np.zeros(n, dtype=np.int64) for s in self.sides}
        self.t = 0
        self.tape = UniformTape(base_key, n, run_offset, draws_per_step=len(self.sides))

    def current(self) -> np.ndarray:
        return self.vals

    def _col(self, name: str, side: str | None = None) -> np.ndarray:
        return self.vals[:, self.ix[_sv(name, side) if side else name]]

    def step(self) -> np.ndarray:
        p = self.p
        v = self.vals
        ix = self.ix
        out = v.copy()
        warn_post: dict = {}

        # --- process effects (synchronous; attacks applied last) ---
        for s in self.sides:
            temp = self._col("temp", s)
            cool = self._col("cool", s)
            ch_speed = self._col("ch_speed", s)
            ch_in = self._col("ch_speed_R_to_L" if s == "L" else "ch_speed_L_to_R")
            ph = self.phase[s]

            guard_cold = (temp + self._col("temp_fake", s)) < p.threshold
            at_guard = ph == 0
            at_check = ph == 5
            cool_new = np.where(at_guard & ~guard_cold, ON, np.where(at_check, OFF, cool))
            speed_new = np.where(
                at_check, np.where(ch_speed == SLOW, SLOW, ch_in), self._col("speed", s)
            )
            self.phase[s] = np.where(
                at_guard, np.where(guard_cold, 5, 1), np.where(at_check, 0, ph + 1)
            )

            warn = (temp > p.max_temp) & (cool == OFF)
            out[:, ix[_sv("cool", s)]] = cool_new
            out[:, ix[_sv("speed", s)]] = speed_new
            out[:, ix[_sv("ch_warning", s)]] = np.where(warn, HOT, OK)
            out[:, ix[_sv("ch_speed", s)]] = np.where(warn, SLOW, HALF)
            ch_out = "ch_speed_L_to_R" if s == "L" else "ch_speed_R_to_L"
            out[:, ix[ch_out]] = np.where(warn, FULL, HALF)
            warn_post[s] = np.where(warn, HOT, OK)

        if self.cfg.dual:
            wl = self._col("ch_warning", "L") == HOT
            wr = self._col("ch_warning", "R") == HOT
            out[:, ix["ch_alarm"]] = np.where(
                wl & wr, BOTH, np.where(wl, LEFT, np.where(wr, RIGHT, NONE))
            )

        for att in self.cfg.attacks:
            s = att.side
            if att.kind == "act":
                active = self._col("temp", s) < (p.max_temp - att.ac)
                out[:, ix[_sv("cool", s)]] = np.where(
                    active, OFF, out[:, ix[_sv("cool", s)]]
                )
            elif att.kind == "sen":
                out[:, ix[_sv("temp_fake", s)]] = -att.tf
            else:  # saw
                if self.t == 0:
                    out[:, ix[_sv("aw_l", s)]] = self._col("left", s)
                    out[:, ix[_sv("aw_r", s)]] = self._col("right", s)
                else:
                    cs = self._col("cs")
                    inside = (self._col("aw_l", s) <= cs) & (cs <= self._col("aw_r", s))
                    out[:, ix[_sv("temp_fake", s)]] = np.where(inside, -att.tf, 0.0)

        # --- environment on the post-effect state ---
        # reads of variables the processes never write (temp, p's, stress,
        # fn, fp, cs) go through the pre-step matrix v to match the kernel
        u = self.tape.next_step()
        cs = v[:, ix["cs"]]
        for j, s in enumerate(self.sides):
            cool = out[:, ix[_sv("cool", s)]]
            speed = out[:, ix[_sv("speed", s)]]
            coolm = cool == ON
            s0 = ~coolm & (speed == SLOW)
            s1 = ~coolm & (speed == HALF)
            lo_d = np.where(coolm, -1.2, np.where(s0, 0.1, np.where(s1, 0.3, 0.7)))
            hi_d = np.where(coolm, -0.8, np.where(s0, 0.3, np.where(s1, 0.7, 1.2)))
            delta = lo_d + (hi_d - lo_d) * (1.0 - u[:, j])

            temp = v[:, ix[_sv("temp", s)]]
            ps = [v[:, ix[_sv(f"p{k}", s)]] for k in range(1, 7)]
            out[:, ix[_sv("temp", s)]] = temp + delta
            out[:, ix[_sv("p1", s)]] = temp
            for k in range(2, 7):
                out[:, ix[_sv(f"p{k}", s)]] = ps[k - 2]

            hot_count = sum((arr >= p.max_temp).astype(np.int64) for arr in ps)
            cond = hot_count > 3
            stress = v[:, ix[_sv("stress", s)]]
            out[:, ix[_sv("stress", s)]] = np.where(
                cond, np.minimum(1.0, stress + p.stress_incr), stress
            )
            out[:, ix[_sv("sc", s)]] = v[:, ix[_sv("sc", s)]] + cond

            warn = warn_post[s]
            fn = v[:, ix[_sv("fn", s)]]
            fp = v[:, ix[_sv("fp", s)]]
            out[:, ix[_sv("fn", s)]] = (cs * fn + np.maximum(0.0, stress - warn)) / (cs + 1.0)
            out[:, ix[_sv("fp", s)]] = (cs * fp + np.maximum(0.0, warn - stress)) / (cs + 1.0)

        if self.cfg.dual:
            alarm = out[:, ix["ch_alarm"]]
            al = ((alarm == LEFT) | (alarm == BOTH)).astype(np.float64)
            ar = ((alarm == RIGHT) | (alarm == BOTH)).astype(np.float64)
            sl = v[:, ix[_sv("stress", "L")]]
            sr = v[:, ix[_sv("stress", "R")]]
            w = p.clearance
            inc_fn = np.minimum(1.0, w * np.maximum(0.0, sl - al) + w * np.maximum(0.0, sr - ar))
            inc_fp = np.minimum(1.0, w * np.maximum(0.0, al - sl) + w * np.maximum(0.0, ar - sr))
            out[:, ix["fn"]] = (cs * v[:, ix["fn"]] + inc_fn) / (cs + 1.0)
            out[:, ix["fp"]] = (cs * v[:, ix["fp"]] + inc_fp) / (cs + 1.0)

        out[:, ix["cs"]] = cs + 1.0
        self.vals = out
        self.t += 1
        return out


register_environment(
    "engine",
    lambda dual=False, **kw: EngineEnv(EngineParams(**kw), bool(dual)),
)
