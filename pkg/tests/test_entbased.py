import itertools

import numpy as np
import pytest

from vqlab import entbased, qsim, stats
from vqlab.entbased import ClassicalStrategy, GameRecord, ObservableSpec, QuantumStrategy, TwoProverSystem


def test_handles_cannot_reach_the_other_partition():
    system = TwoProverSystem.bell_pair()
    alice = system.prover("A")
    assert alice.size == 1
    with pytest.raises(IndexError):
        alice.apply(qsim.GATES["X"], [1])
    with pytest.raises(IndexError):
        alice.measure(ObservableSpec("Z", target=1), np.random.default_rng(0))
    with pytest.raises(ValueError):
        TwoProverSystem(entbased.phi_plus(), ((0,), (0, 1)))


def test_no_signalling(rng):
    # B's reduced state is I/2 whatever unitary A applies locally
    for _ in range(5):
        system = TwoProverSystem.bell_pair()
        system.prover("A").apply(qsim.random_unitary(2, rng), [0])
        rho = qsim.partial_trace(system.state.to_density(), [1]).matrix
        np.testing.assert_allclose(rho, np.eye(2) / 2, atol=1e-12)


def test_ideal_value_is_tsirelson():
    assert entbased.win_probability(entbased.ideal_strategy()) == pytest.approx(np.cos(np.pi / 8) ** 2, abs=1e-9)
    assert entbased.TSIRELSON == pytest.approx((2 + np.sqrt(2)) / 4, abs=1e-12)


def test_classical_bound_by_enumeration():
    values = [s.value() for s in entbased.all_classical_strategies()]
    assert len(values) == 16 and max(values) == 0.75 and entbased.classical_chsh_bound() == 0.75


def test_aligned_strategy_is_weaker():
    s = QuantumStrategy(alice=("Z", "Z"), bob=("Z", "Z"))
    assert entbased.win_probability(s) == pytest.approx(0.75)
    assert entbased.win_probability(s) < entbased.TSIRELSON


def test_deviation_lowers_the_value():
    s = QuantumStrategy(deviation=tuple(map(tuple, qsim.GATES["X"])))
    assert entbased.win_probability(s) < entbased.TSIRELSON - 0.1


def test_campaign_matches_exact_value(rng):
    games = 20_000
    res = entbased.chsh_campaign("ideal", games, rng, exact_rounds=200)
    assert stats.within_sigma(res.rate, entbased.TSIRELSON, games)
    cls = entbased.chsh_campaign(ClassicalStrategy((0, 0, 0, 0)), 1000, rng, keep_records=True)
    assert len(cls.records) == 1000 and stats.within_sigma(cls.rate, 0.75, 1000)


def test_game_record_validation():
    GameRecord(1, 1, 0, 1, True)
    with pytest.raises(ValueError):
        GameRecord(1, 1, 0, 0, True)
    with pytest.raises(ValueError):
        ClassicalStrategy((0, 1, 2, 0))


def test_rigidity_gate():
    ideal = entbased.TSIRELSON
    assert entbased.rigidity_threshold_check(ideal, 10_000, 0.01)
    assert not entbased.rigidity_threshold_check(0.75, 10_000, 0.05)
    assert entbased.rigidity_threshold_check(0.0, 10, 1.0)
    with pytest.raises(ValueError):
        entbased.rigidity_threshold_check(0.8, 0, 0.1)


@pytest.mark.parametrize("label,outcome,want", [("Z", 1, "0"), ("Z", -1, "1"), ("X", 1, "+0"), ("X", -1, "+4"),
                                                ("Y", 1, "+6"), ("Y", -1, "+2"), ("(X+Y)/√2", 1, "+7")])
def test_remote_preparation_examples(label, outcome, want):
    for seed in itertools.count():
        system = TwoProverSystem.bell_pair()
        out, partner = entbased.remote_prepare(system, "A", ObservableSpec(label), np.random.default_rng(seed))
        if out == outcome:
            break
    assert entbased.identify_resource(partner) == want


def test_remote_preparation_needs_a_fresh_bell_pair(rng):
    system = TwoProverSystem.bell_pair()
    system.prover("A").apply(qsim.GATES["H"], [0])
    with pytest.raises(ValueError):
        entbased.remote_prepare(system, "B", ObservableSpec("Z"), rng)


def test_observable_aliases():
    assert ObservableSpec("(X+Z)/sqrt2").label == "(X+Z)/√2"
    assert ObservableSpec("X+Z").label == "(X+Z)/√2"
    with pytest.raises(ValueError):
        ObservableSpec("W")
