import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxphase.contextual import (
    ContextClass,
    MixedBasisError,
    all_lifts,
    collapse,
    enumerate_representatives,
    fixture_entries,
    isolated_sequence,
    lift,
    local_states,
    mixed_lift,
    project,
    same_coset,
    search_y_lifts,
    phase_pattern,
    y_lift,
)
from ctxphase.freevec import DestructiveInterferenceError, FormalSum, equivalent_mod_R, identify_T, quotient_map
from ctxphase.hilbert import (
    BellKind,
    DomainError,
    Frame,
    bell,
    equal_up_to_global_phase,
    expectation,
    frame_ket,
    identify_basis_ket,
    is_joint_eigenvector,
    pauli,
)

C1, C2 = ContextClass.CLASS1, ContextClass.CLASS2
KINDS = list(BellKind)
ZX = (Frame.Z, Frame.X)


def same_ket(a, b):
    return equal_up_to_global_phase(a, b, 1e-9)


@pytest.mark.parametrize(
    "kind, klass, frame, text",
    [
        (BellKind.PSI_PLUS, C1, Frame.X, "(|0'>,|0'>) + (|1'>,|-1'>)"),
        (BellKind.PSI_MINUS, C2, Frame.Z, "(|0>,|1>) + (|-1>,|0>)"),
        (BellKind.PHI_PLUS, C2, Frame.Z, "(|0>,|0>) + (|-1>,|-1>)"),
        (BellKind.PHI_MINUS, C2, Frame.Z, "(|0>,|0>) + (|1>,|-1>)"),
    ],
)
def test_lift_examples(kind, klass, frame, text):
    rep = lift(kind, klass, frame)
    assert str(rep.sum) == text
    assert rep.sum.structurally_equal(FormalSum.parse(text))


def test_all_sixteen_lifts_reconstruct_their_state():
    reps = all_lifts()
    assert len(reps) == 16
    for rep in reps:
        assert rep.quotient_holds()
        assert abs(np.vdot(bell(rep.kind).amps, quotient_map(rep.sum).amps)) >= 1 - 1e-9


def test_lift_rejects_y_presentation():
    with pytest.raises(DomainError):
        lift(BellKind.PSI_PLUS, C1, Frame.Y)


@pytest.mark.parametrize("rep", all_lifts() + [y_lift(k, c) for k in KINDS for c in ContextClass], ids=str)
def test_local_phase_constraint(rep):
    phi_a, phi_b = rep.local_phases
    target = rep.superposition_phase()
    assert abs(cmath.exp(-1j * phi_a) * cmath.exp(1j * phi_b) - target) < 1e-12
    assert rep.phase_constraint_residual() < 1e-12


def test_enumeration_counts_for_psi_minus():
    reps = enumerate_representatives(BellKind.PSI_MINUS, Frame.Z, [math.pi])
    assert len(reps) == 8
    assert sum(r.klass is C1 for r in reps) == 4
    assert sum(r.klass is C2 for r in reps) == 4


def test_pattern_row4_class2_reproduces_tabulated_entry():
    f = phase_pattern(BellKind.PSI_PLUS, Frame.Z, 4, C2, math.pi, 0.0)
    assert f.structurally_equal(lift(BellKind.PSI_PLUS, C2, Frame.Z).sum)
    found = [r for r in enumerate_representatives(BellKind.PSI_PLUS, Frame.Z) if r.sum.structurally_equal(f)]
    assert found and found[0].klass is C2


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("frame", ZX)
def test_enumerated_representatives_share_a_coset(kind, frame):
    reps = enumerate_representatives(kind, frame)
    assert {r.klass for r in reps} == {C1, C2}
    base = lift(kind, C1, frame)
    for r in reps:
        assert r.quotient_holds()
        assert equivalent_mod_R(r.sum, base.sum)
        assert same_coset(r, base)
        assert r.phase_constraint_residual() < 1e-12


def test_enumeration_needs_a_grid():
    with pytest.raises(DomainError):
        enumerate_representatives(BellKind.PSI_MINUS, Frame.Z, [])


def test_project_examples():
    rep = lift(BellKind.PSI_PLUS, C1, Frame.X)
    assert project(rep, "A").structurally_equal(FormalSum.parse("|0'> + |1'>"))
    assert project(rep, "B").structurally_equal(FormalSum.parse("|0'> + |-1'>"))
    single = FormalSum.parse("(|0>,|1'>)")
    assert project(single, "A").structurally_equal(FormalSum.parse("|0>"))
    with pytest.raises(DomainError):
        project(rep, "C")


def test_collapse_worked_example():
    c1 = lift(BellKind.PSI_PLUS, C1, Frame.X)
    c2 = lift(BellKind.PSI_PLUS, C2, Frame.X)
    assert same_ket(collapse(project(c1, "A")), frame_ket(Frame.Z, 0))
    assert same_ket(collapse(project(c1, "B")), frame_ket(Frame.Z, 1))
    assert same_ket(collapse(project(c2, "A")), frame_ket(Frame.Z, 1))
    assert same_ket(collapse(project(c2, "B")), frame_ket(Frame.Z, 0))


def test_collapse_of_cancelling_sum_is_an_error():
    with pytest.raises(DestructiveInterferenceError):
        collapse(FormalSum.parse("|1> + |-1>"))


@pytest.mark.parametrize(
    "kind, klass, frame, a, b",
    [
        (BellKind.PSI_PLUS, C1, Frame.Z, (Frame.Z, 0), (Frame.Z, 1)),
        (BellKind.PSI_PLUS, C2, Frame.Z, (Frame.Z, 1), (Frame.Z, 0)),
        (BellKind.PSI_PLUS, C1, Frame.X, (Frame.X, 0), (Frame.X, 0)),
        (BellKind.PSI_MINUS, C1, Frame.X, (Frame.X, 0), (Frame.X, 1)),
    ],
)
def test_local_states_examples(kind, klass, frame, a, b):
    pair = local_states(kind, klass, frame)
    assert pair.outcome_frame is frame
    assert same_ket(pair.psi_a, frame_ket(*a))
    assert same_ket(pair.psi_b, frame_ket(*b))


def test_psi_minus_class1_keeps_the_sign_on_b():
    pair = local_states(BellKind.PSI_MINUS, C1, Frame.X)
    np.testing.assert_allclose(pair.signed_b.amps, frame_ket(Frame.X, 1, -1).amps, atol=1e-12)


@pytest.mark.parametrize("entry", fixture_entries("lifts") + fixture_entries("y_lifts"), ids=lambda e: f"{e['kind']}-{e['class']}-{e['presentation']}-{e['measurement']}")
def test_fixture_collapses_match_pipeline(entry):
    kind, klass, frame = BellKind[entry["kind"]], ContextClass[entry["class"]], Frame[entry["measurement"]]
    pair = local_states(kind, klass, frame)
    np.testing.assert_allclose(pair.signed_a.amps, identify_T(FormalSum.parse(entry["psi_a"])).amps, atol=1e-12)
    np.testing.assert_allclose(pair.signed_b.amps, identify_T(FormalSum.parse(entry["psi_b"])).amps, atol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("frame", list(Frame))
def test_local_kets_are_frame_basis_kets(kind, frame):
    for klass in ContextClass:
        pair = local_states(kind, klass, frame)
        for ket in (pair.psi_a, pair.psi_b):
            assert identify_basis_ket(ket, frames=(frame,)) is not None
            assert abs(ket.norm() - 1) < 1e-12


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("frame", list(Frame))
def test_class_complementarity(kind, frame):
    p1, p2 = local_states(kind, C1, frame), local_states(kind, C2, frame)
    assert abs(p1.psi_a.inner(p2.psi_a)) <= 1e-9
    assert abs(p1.psi_b.inner(p2.psi_b)) <= 1e-9


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("frame", list(Frame))
def test_eigenvalue_product_matches_joint_eigenvalue(kind, frame):
    op = pauli(frame)
    joint = is_joint_eigenvector(bell(kind), op, op)
    for klass in ContextClass:
        pair = local_states(kind, klass, frame)
        product = expectation(pair.psi_a, op) * expectation(pair.psi_b, op)
        assert abs(product - joint) < 1e-9


def test_local_states_repeatable():
    for kind in KINDS:
        a = local_states(kind, C1, Frame.Z)
        b = local_states(kind, C1, Frame.Z)
        assert a.psi_a == b.psi_a and a.psi_b == b.psi_b


@pytest.mark.parametrize("kind", KINDS)
def test_y_search_reproduces_fixture(kind):
    found = search_y_lifts(kind)
    assert [r.klass for r in found] == [C1, C2]
    for rep in found:
        assert rep.sum.structurally_equal(y_lift(kind, rep.klass).sum)


@pytest.mark.parametrize(
    "kind, fa, fb",
    [
        (BellKind.PSI_PLUS, Frame.Z, Frame.X),
        (BellKind.PHI_PLUS, Frame.Z, Frame.X),
        (BellKind.PSI_MINUS, Frame.X, Frame.Z),
        (BellKind.PHI_MINUS, Frame.Z, Frame.Y),
    ],
)
def test_mixed_lift_is_a_no_go(kind, fa, fb):
    with pytest.raises(MixedBasisError) as info:
        mixed_lift(kind, fa, fb)
    assert info.value.witness is None
    assert is_joint_eigenvector(bell(kind), pauli(fa), pauli(fb)) is None


def test_mixed_lift_needs_distinct_frames():
    with pytest.raises(DomainError):
        mixed_lift(BellKind.PSI_PLUS, Frame.Z, Frame.Z)


def test_isolated_sequence_definite_frame():
    assert isolated_sequence(BellKind.PSI_PLUS, C1, Frame.Z, 5, seed=0) == [1] * 5
    assert isolated_sequence(BellKind.PSI_PLUS, C2, Frame.Z, 3, seed=0) == [-1] * 3


def test_isolated_sequence_other_frame_is_fair_and_seeded():
    seq = isolated_sequence(BellKind.PSI_PLUS, C1, Frame.X, 20000, seed=1)
    assert abs(np.mean(seq)) < 3 / math.sqrt(len(seq))
    assert isolated_sequence(BellKind.PSI_PLUS, C1, Frame.X, 10, 42) == isolated_sequence(
        BellKind.PSI_PLUS, C1, Frame.X, 10, 42
    )


@given(st.integers(0, 2**32 - 1), st.sampled_from(KINDS), st.sampled_from(list(ContextClass)))
def test_isolated_sequence_outcomes_are_signs(seed, kind, klass):
    seq = isolated_sequence(kind, klass, Frame.X, 16, seed)
    assert set(seq) <= {1, -1}
