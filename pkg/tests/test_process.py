import numpy as np
import pytest

from evometric.dataspace import DataSpace, VarSpec
from evometric.errors import EvaluationError, SemanticError, StructuralError
from evometric.process import (
    Call,
    Const,
    If,
    Interleave,
    Op,
    PChoice,
    Prefix,
    StepDistribution,
    SyncPar,
    Var,
    eval_expr,
    pstep,
    tick,
    validate,
    write_set,
)

from conftest import random_valid_system

Q_STEP = 1.2
Q_MAX = 6.0
L_GOAL = 10.0
DELTA_L = 0.5


def tanks_space():
    return DataSpace([
        VarSpec("q1", 0.0, Q_MAX), VarSpec("q3", 0.0, Q_MAX),
        VarSpec("l1", 0.0, 20.0), VarSpec("l3", 0.0, 20.0),
    ])


def p_in():
    dec = Prefix((Op("max", (Const(0.0), Op("-", (Var("q1"), Const(Q_STEP))))),),
                 ("q1",), Call("P_in"))
    inc = Prefix((Op("min", (Const(Q_MAX), Op("+", (Var("q1"), Const(Q_STEP))))),),
                 ("q1",), Call("P_in"))
    return If(
        Op(">", (Var("l1"), Const(L_GOAL + DELTA_L))), dec,
        If(Op("<", (Var("l1"), Const(L_GOAL - DELTA_L))), inc, tick(Call("P_in"))),
    )


def p_out():
    inc = Prefix((Op("min", (Const(Q_MAX), Op("+", (Var("q3"), Const(Q_STEP))))),),
                 ("q3",), Call("P_out"))
    dec = Prefix((Op("max", (Const(0.0), Op("-", (Var("q3"), Const(Q_STEP))))),),
                 ("q3",), Call("P_out"))
    return If(
        Op(">", (Var("l3"), Const(L_GOAL + DELTA_L))), inc,
        If(Op("<", (Var("l3"), Const(L_GOAL - DELTA_L))), dec, tick(Call("P_out"))),
    )


def tanks_defs():
    return {"P_in": p_in(), "P_out": p_out(),
            "P_Tanks": SyncPar(Call("P_in"), Call("P_out"))}


class TestEvalExpr:
    def test_pump_decrement_expression(self):
        # max{0, q1 - q_step} with q1 = 3 and q_step = 1.2
        d = tanks_space().state([3.0, 0, 0, 0])
        e = Op("max", (Const(0.0), Op("-", (Var("q1"), Const(Q_STEP)))))
        assert eval_expr(e, d) == pytest.approx(1.8, abs=0)

    def test_comparison_encodes_as_one(self):
        d = tanks_space().state([0, 0, 12.0, 0])
        e = Op(">", (Var("l1"), Op("+", (Const(L_GOAL), Const(DELTA_L)))))
        assert eval_expr(e, d) == 1.0

    def test_constant(self):
        assert eval_expr(Const(5.0), tanks_space().state([0, 0, 0, 0])) == 5.0

    def test_division_by_zero_names_subexpression(self):
        d = tanks_space().state([0, 0, 0, 0])
        with pytest.raises(EvaluationError, match="division by zero"):
            eval_expr(Op("/", (Const(1.0), Var("q1"))), d)

    def test_sqrt_of_negative(self):
        d = tanks_space().state([0, 0, 0, 0])
        with pytest.raises(EvaluationError, match="sqrt"):
            eval_expr(Op("sqrt", (Const(-1.0),)), d)

    def test_boolean_connectives_strict(self):
        d = tanks_space().state([0, 0, 0, 0])
        ok = Op("and", (Const(1.0), Const(0.0)))
        assert eval_expr(ok, d) == 0.0
        with pytest.raises(EvaluationError):
            eval_expr(Op("and", (Const(2.0), Const(1.0))), d)

    def test_conditional_selection(self):
        d = tanks_space().state([0, 0, 0, 0])
        assert eval_expr(Op("ite", (Const(1.0), Const(7.0), Const(9.0))), d) == 7.0
        assert eval_expr(Op("ite", (Const(0.0), Const(7.0), Const(9.0))), d) == 9.0

    def test_unknown_operator_rejected(self):
        with pytest.raises(StructuralError):
            Op("bogus", (Const(1.0),))


class TestValidate:
    def test_tanks_program_is_valid(self):
        report = validate(Call("P_Tanks"), tanks_defs(), tanks_space())
        assert report.ok

    def test_self_composition_overlaps(self):
        defs = tanks_defs()
        report = validate(SyncPar(Call("P_in"), Call("P_in")), defs, tanks_space())
        kinds = {i.kind for i in report.issues}
        assert kinds == {"write-overlap"}
        assert "q1" in report.issues[0].message

    def test_unguarded_recursion(self):
        report = validate(Call("A"), {"A": Call("A")}, tanks_space())
        assert any(i.kind == "unguarded-recursion" for i in report.issues)

    def test_undefined_process(self):
        report = validate(Call("Ghost"), {}, tanks_space())
        assert any(i.kind == "undefined-process" for i in report.issues)

    def test_unknown_variable(self):
        p = Prefix((Const(1.0),), ("warp",), Call("Loop"))
        report = validate(p, {"Loop": tick(Call("Loop"))}, tanks_space())
        assert any(i.kind == "unknown-variable" for i in report.issues)

    def test_write_set_through_definitions(self):
        assert write_set(Call("P_Tanks"), tanks_defs()) == {"q1", "q3"}


class TestPStep:
    def test_pump_branch_dirac(self):
        # l1 = 12 > 10.5 selects the decrement branch: q1 <- max{0, 3-1.2}
        d = tanks_space().state([3.0, 0, 12.0, 0])
        dist = pstep(Call("P_in"), d, tanks_defs())
        assert len(dist) == 1
        p, eff, cont = dist.triples[0]
        assert p == 1.0
        assert eff == (("q1", 1.8),)
        assert cont == Call("P_in")

    def test_tick_has_empty_effect(self):
        d = tanks_space().state([0, 0, 10.0, 0])
        dist = pstep(tick(Call("P_in")), d, tanks_defs())
        assert dist.triples == ((1.0, (), Call("P_in")),)

    def test_choice_mixture(self):
        d = tanks_space().state([0, 0, 0, 0])
        a = Prefix((Const(1.0),), ("q1",), Call("Loop"))
        b = Prefix((Const(2.0),), ("q1",), Call("Loop"))
        dist = pstep(PChoice(((0.5, a), (0.5, b))), d, {"Loop": tick(Call("Loop"))})
        assert len(dist) == 2
        assert sorted(t[0] for t in dist) == [0.5, 0.5]

    def test_choice_merges_identical_support(self):
        d = tanks_space().state([0, 0, 0, 0])
        a = Prefix((Const(1.0),), ("q1",), Call("Loop"))
        dist = pstep(PChoice(((0.5, a), (0.5, a))), d, {"Loop": tick(Call("Loop"))})
        assert len(dist) == 1
        assert dist.triples[0][0] == pytest.approx(1.0)

    def test_interleave_wraps_continuations(self):
        d = tanks_space().state([0, 0, 0, 0])
        a = Prefix((Const(1.0),), ("q1",), Call("Loop"))
        b = Prefix((Const(2.0),), ("q3",), Call("Loop"))
        dist = pstep(Interleave(a, 0.3, b), d, {"Loop": tick(Call("Loop"))})
        assert len(dist) == 2
        (p1, e1, c1), (p2, e2, c2) = dist.triples
        assert (p1, e1) == (0.3, (("q1", 1.0),))
        assert c1 == Interleave(Call("Loop"), 0.3, b)
        assert (p2, e2) == (0.7, (("q3", 2.0),))
        assert c2 == Interleave(a, 0.3, Call("Loop"))

    def test_sync_product_concatenates_effects(self):
        d = tanks_space().state([3.0, 3.0, 12.0, 8.0])
        dist = pstep(Call("P_Tanks"), d, tanks_defs())
        assert len(dist) == 1
        _, eff, cont = dist.triples[0]
        assert eff == (("q1", 1.8), ("q3", 1.8))
        assert cont == SyncPar(Call("P_in"), Call("P_out"))

    def test_sync_product_mass(self):
        d = tanks_space().state([0, 0, 0, 0])
        a = PChoice(((0.4, Prefix((Const(1.0),), ("q1",), Call("Loop"))),
                     (0.6, Prefix((Const(2.0),), ("q1",), Call("Loop")))))
        b = PChoice(((0.5, Prefix((Const(1.0),), ("q3",), Call("Loop"))),
                     (0.5, Prefix((Const(2.0),), ("q3",), Call("Loop")))))
        dist = pstep(SyncPar(a, b), d, {"Loop": tick(Call("Loop"))})
        assert len(dist) == 4
        assert sum(t[0] for t in dist) == pytest.approx(1.0, abs=1e-12)

    def test_guard_must_be_binary(self):
        d = tanks_space().state([3.0, 0, 0, 0])
        bad = If(Var("q1"), tick(Call("Loop")), tick(Call("Loop")))
        with pytest.raises(SemanticError):
            pstep(bad, d, {"Loop": tick(Call("Loop"))})

    def test_pstep_is_deterministic(self):
        d = tanks_space().state([3.0, 3.0, 12.0, 8.0])
        assert pstep(Call("P_Tanks"), d, tanks_defs()) == pstep(
            Call("P_Tanks"), d, tanks_defs()
        )

    def test_undefined_call_raises(self):
        d = tanks_space().state([0, 0, 0, 0])
        with pytest.raises(StructuralError):
            pstep(Call("Ghost"), d, {})


class TestNormalizationProperty:
    def test_random_processes_normalize(self, small_space):
        r = np.random.Generator(np.random.PCG64(1234))
        for _ in range(150):
            p, defs = random_valid_system(r, small_space, depth=3)
            assert validate(p, defs, small_space).ok
            vals = [r.uniform(v.lower, v.upper) for v in small_space.vars]
            d = small_space.state(vals)
            dist = pstep(p, d, defs)
            total = sum(t[0] for t in dist)
            assert abs(total - 1.0) <= 1e-9
            assert all(t[0] > 0 for t in dist)
            assert len(dist) < 200


class TestConstructorInvariants:
    def test_choice_weights_must_sum_to_one(self):
        a = tick(Call("Loop"))
        with pytest.raises(StructuralError):
            PChoice(((0.5, a), (0.6, a)))
        with pytest.raises(StructuralError):
            PChoice(((-0.1, a), (1.1, a)))

    def test_interleave_probability_range(self):
        a = tick(Call("Loop"))
        with pytest.raises(StructuralError):
            Interleave(a, 1.5, a)

    def test_step_distribution_checks_mass(self):
        with pytest.raises(StructuralError):
            StepDistribution(((0.5, (), Call("A")),))

    def test_prefix_arity(self):
        with pytest.raises(StructuralError):
            Prefix((Const(1.0),), ("a", "b"), Call("A"))
