import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semigmm import pseudo, sgmm
from semigmm.errors import ConsistencyError

from oracles import pseudo_selection_oracle


def _table(proba):
    proba = np.asarray(proba, dtype=np.float64)
    return pseudo.ScoreTable(proba=proba, confidence=proba.max(axis=1))


def _random_proba(rng, n, K):
    raw = rng.uniform(0.01, 1.0, size=(n, K))
    return raw / raw.sum(axis=1, keepdims=True)


def test_score_confidence_is_row_max():
    scores = _table([[0.2, 0.8], [0.55, 0.45]])
    assert scores.confidence == pytest.approx([0.8, 0.55])


def test_score_uniform_rows():
    scores = _table(np.full((3, 10), 0.1))
    assert scores.confidence == pytest.approx([0.1, 0.1, 0.1])


def test_score_unlabeled_uses_model_probabilities():
    rng = np.random.default_rng(0)
    weights = rng.dirichlet(np.ones(3))
    means = rng.standard_normal((3, 2)) * 3.0
    covs = np.stack([np.eye(2)] * 3)
    model = sgmm.SgmmModel(
        weights=weights,
        means=means,
        covariances=covs,
        class_given_component=np.eye(3),
    )
    x = rng.standard_normal((8, 2))
    scores = pseudo.score_unlabeled(model, x)
    expected = sgmm.predict_proba(model, x)
    assert np.allclose(scores.proba, expected)
    assert np.allclose(scores.confidence, expected.max(axis=1))


def test_candidates_all_below_threshold():
    cfg = pseudo.PseudoConfig(tau=0.99, alpha=0.5)
    scores = _table([[0.9, 0.1], [0.3, 0.7]])
    candidates = pseudo.build_candidates(scores, cfg, 2)
    assert candidates == [[], []]


def test_candidates_sorted_by_confidence():
    cfg = pseudo.PseudoConfig(tau=0.9, alpha=1.0)
    scores = _table([[0.95, 0.05], [0.97, 0.03]])
    candidates = pseudo.build_candidates(scores, cfg, 2)
    assert [i for i, _ in candidates[0]] == [1, 0]
    assert candidates[1] == []


def test_candidates_ties_break_to_smaller_index():
    cfg = pseudo.PseudoConfig(tau=0.5, alpha=1.0)
    scores = _table([[0.8, 0.2], [0.8, 0.2], [0.2, 0.8]])
    candidates = pseudo.build_candidates(scores, cfg, 2)
    assert [i for i, _ in candidates[0]] == [0, 1]
    assert [i for i, _ in candidates[1]] == [2]


def test_candidates_argmax_tie_goes_to_smallest_class():
    cfg = pseudo.PseudoConfig(tau=0.3, alpha=1.0)
    scores = _table([[0.5, 0.5]])
    candidates = pseudo.build_candidates(scores, cfg, 2)
    assert [i for i, _ in candidates[0]] == [0]
    assert candidates[1] == []


def test_proportional_min_rule():
    cfg = pseudo.PseudoConfig(tau=0.5, alpha=0.5)
    candidates = [
        [(i, 0.9 - i * 1e-3) for i in range(10)],
        [(100 + i, 0.8) for i in range(4)],
        [(200 + i, 0.7) for i in range(8)],
    ]
    dp = pseudo.proportional_sample(candidates, cfg)
    assert dp.per_class_count == 2
    assert len(dp) == 6
    assert dp.warning is None


def test_proportional_empty_class_blocks_everything():
    cfg = pseudo.PseudoConfig(tau=0.5, alpha=0.5)
    dp = pseudo.proportional_sample([[(0, 0.9)], []], cfg)
    assert dp.per_class_count == 0
    assert len(dp) == 0
    assert dp.warning is not None


def test_proportional_alpha_one_keeps_everything():
    cfg = pseudo.PseudoConfig(tau=0.5, alpha=1.0)
    candidates = [
        [(i, 0.9) for i in range(7)],
        [(10 + i, 0.9) for i in range(7)],
    ]
    dp = pseudo.proportional_sample(candidates, cfg)
    assert dp.per_class_count == 7
    assert len(dp) == 14


def test_selection_matches_bruteforce_oracle():
    rng = np.random.default_rng(1)
    for trial in range(50):
        n = int(rng.integers(1, 60))
        K = int(rng.integers(2, 6))
        tau = float(rng.uniform(0.2, 0.9))
        alpha = float(rng.uniform(0.05, 1.0))
        proba = _random_proba(rng, n, K)
        cfg = pseudo.PseudoConfig(tau=tau, alpha=alpha)
        candidates = pseudo.build_candidates(_table(proba), cfg, K)
        dp = pseudo.proportional_sample(candidates, cfg)
        oracle_cands, oracle_n, oracle_sel = pseudo_selection_oracle(proba, tau, alpha)
        assert [list(c) for c in candidates] == [list(c) for c in oracle_cands]
        assert dp.per_class_count == oracle_n
        got = [(e.index, e.assigned_class, e.confidence) for e in dp.entries]
        assert got == oracle_sel


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**31 - 1),
    st.floats(min_value=0.05, max_value=0.9),
    st.floats(min_value=0.05, max_value=0.89),
)
def test_raising_tau_never_enlarges_candidates(seed, tau_low, delta):
    tau_high = min(tau_low + delta, 0.99)
    rng = np.random.default_rng(seed)
    proba = _random_proba(rng, int(rng.integers(1, 40)), 3)
    scores = _table(proba)
    low = pseudo.build_candidates(scores, pseudo.PseudoConfig(tau=tau_low, alpha=1.0), 3)
    high = pseudo.build_candidates(scores, pseudo.PseudoConfig(tau=tau_high, alpha=1.0), 3)
    for k in range(3):
        assert set(i for i, _ in high[k]) <= set(i for i, _ in low[k])


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**31 - 1),
    st.floats(min_value=0.1, max_value=0.9),
    st.floats(min_value=0.05, max_value=1.0),
)
def test_selection_invariants(seed, tau, alpha):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 5))
    proba = _random_proba(rng, int(rng.integers(1, 50)), K)
    cfg = pseudo.PseudoConfig(tau=tau, alpha=alpha)
    dp = pseudo.proportional_sample(pseudo.build_candidates(_table(proba), cfg, K), cfg)
    # threshold soundness and exact class balance
    per_class = {k: 0 for k in range(1, K + 1)}
    for e in dp.entries:
        assert e.confidence > tau
        per_class[e.assigned_class] += 1
    assert all(v in (0, dp.per_class_count) for v in per_class.values())
    if dp.entries:
        assert all(v == dp.per_class_count for v in per_class.values())
    indices = [e.index for e in dp.entries]
    assert len(set(indices)) == len(indices)


def test_augment_empty_set_is_identity():
    dp = pseudo.proportional_sample([[], []], pseudo.PseudoConfig(tau=0.5, alpha=0.5))
    labeled, unlabeled = pseudo.augment({0: 1}, [1, 2, 3], dp)
    assert labeled == {0: 1}
    assert unlabeled == [1, 2, 3]


def test_augment_moves_samples_between_sets():
    entries = (
        pseudo.PseudoLabel(index=5, assigned_class=1, confidence=0.99),
        pseudo.PseudoLabel(index=9, assigned_class=2, confidence=0.98),
    )
    dp = pseudo.PseudoLabelSet(entries=entries, per_class_count=1)
    labeled, unlabeled = pseudo.augment({0: 1, 1: 2}, [3, 5, 7, 9], dp)
    assert labeled == {0: 1, 1: 2, 5: 1, 9: 2}
    assert unlabeled == [3, 7]


def test_augment_rejects_rerun():
    dp = pseudo.PseudoLabelSet(
        entries=(pseudo.PseudoLabel(index=5, assigned_class=1, confidence=0.99),),
        per_class_count=1,
    )
    labeled, unlabeled = pseudo.augment({}, [5, 6], dp)
    with pytest.raises(ConsistencyError):
        pseudo.augment(labeled, unlabeled, dp)


def test_augment_rejects_collision_with_existing_label():
    dp = pseudo.PseudoLabelSet(
        entries=(pseudo.PseudoLabel(index=0, assigned_class=1, confidence=0.99),),
        per_class_count=1,
    )
    with pytest.raises(ConsistencyError):
        pseudo.augment({0: 2}, [0, 1], dp)


def test_config_validation():
    with pytest.raises(ValueError):
        pseudo.PseudoConfig(tau=0.0)
    with pytest.raises(ValueError):
        pseudo.PseudoConfig(tau=1.0)
    with pytest.raises(ValueError):
        pseudo.PseudoConfig(alpha=0.0)
    with pytest.raises(ValueError):
        pseudo.PseudoConfig(alpha=1.2)
    cfg = pseudo.PseudoConfig(alpha=1.0)  # documented extension of the open interval
    assert cfg.alpha == 1.0


def test_pseudo_set_rejects_duplicates_and_imbalance():
    with pytest.raises(ValueError):
        pseudo.PseudoLabelSet(
            entries=(
                pseudo.PseudoLabel(0, 1, 0.9),
                pseudo.PseudoLabel(0, 2, 0.9),
            ),
            per_class_count=1,
        )
    with pytest.raises(ValueError):
        pseudo.PseudoLabelSet(
            entries=(
                pseudo.PseudoLabel(0, 1, 0.9),
                pseudo.PseudoLabel(1, 1, 0.9),
                pseudo.PseudoLabel(2, 2, 0.9),
            ),
            per_class_count=1,
        )


def test_csv_dump(tmp_path):
    dp = pseudo.PseudoLabelSet(
        entries=(pseudo.PseudoLabel(3, 1, 0.75), pseudo.PseudoLabel(8, 2, 0.8)),
        per_class_count=1,
    )
    path = tmp_path / "dp.csv"
    pseudo.write_pseudo_csv(dp, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,class,confidence"
    assert lines[1].startswith("3,1,0.75")
