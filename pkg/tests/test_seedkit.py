import numpy as np
import pytest
from hypothesis import given, strategies as st

from unlbench.seedkit import (
    check_seed, derive_seed, derive_stream, draw_gaussian, draw_uniform, shuffle,
)


def test_same_root_and_label_replays():
    assert draw_uniform(derive_stream(7, "train"), 8) == draw_uniform(derive_stream(7, "train"), 8)


def test_labels_and_roots_separate_streams():
    base = draw_uniform(derive_stream(7, "train"), 8)
    assert base != draw_uniform(derive_stream(7, "unlearn"), 8)
    assert draw_uniform(derive_stream(7, "x"), 8) != draw_uniform(derive_stream(8, "x"), 8)


@pytest.mark.parametrize("label", ["", "café"])
def test_label_must_be_nonempty_ascii(label):
    with pytest.raises(ValueError):
        derive_stream(1, label)


@pytest.mark.parametrize("bad", [-1, 2**64, 1.5, True])
def test_seed_range(bad):
    with pytest.raises((TypeError, ValueError)):
        check_seed(bad)


def test_extreme_seeds_accepted():
    for s in (0, 2**64 - 1):
        assert len(draw_uniform(derive_stream(s, "a"), 3)) == 3


def test_zero_draws_leave_state_unchanged():
    s = derive_stream(3, "u")
    before = s.get_state()
    assert draw_uniform(s, 0) == []
    assert draw_gaussian(s, 0) == []
    assert s.get_state() == before


def test_uniform_advances_by_exactly_n():
    a, b = derive_stream(3, "u"), derive_stream(3, "u")
    draw_uniform(a, 5)
    draw_uniform(a, 4)
    assert draw_uniform(a, 3) == draw_uniform(b, 12)[9:]


def test_replay_from_saved_state():
    s = derive_stream(5, "g")
    draw_uniform(s, 17)
    state = s.get_state()
    first = draw_gaussian(s, 5)
    s.set_state(state)
    assert draw_gaussian(s, 5) == first
    s.set_state(state)
    u = draw_uniform(s, 5)
    s.set_state(state)
    assert draw_uniform(s, 5) == u


def test_uniform_moments():
    u = np.array(draw_uniform(derive_stream(99, "stat"), 10000))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert 0.47 <= u.mean() <= 0.53


def test_gaussian_moments():
    z = np.array(draw_gaussian(derive_stream(99, "stat"), 10000))
    assert 0.9 <= z.var() <= 1.1
    assert abs(z.mean()) < 0.05


def test_gaussian_is_box_muller_of_the_uniform_stream():
    u = np.array(draw_uniform(derive_stream(4, "bm"), 4))
    z = draw_gaussian(derive_stream(4, "bm"), 3)
    r0 = np.sqrt(-2 * np.log(1 - u[0]))
    r1 = np.sqrt(-2 * np.log(1 - u[2]))
    expected = [r0 * np.cos(2 * np.pi * u[1]), r0 * np.sin(2 * np.pi * u[1]), r1 * np.cos(2 * np.pi * u[3])]
    np.testing.assert_allclose(z, expected, rtol=1e-15)


def test_shuffle_edge_cases():
    assert shuffle(derive_stream(1, "s"), []) == []
    assert shuffle(derive_stream(1, "s"), ["a"]) == ["a"]


def test_shuffle_replays():
    items = [1, 2, 3, 4, 5, 6]
    assert shuffle(derive_stream(2, "s"), items) == shuffle(derive_stream(2, "s"), items)


def test_sibling_streams_do_not_interfere():
    a1 = derive_stream(10, "a")
    expected = draw_uniform(derive_stream(10, "b"), 6)
    draw_uniform(a1, 1000)
    assert draw_uniform(derive_stream(10, "b"), 6) == expected


def test_shuffle_covers_all_permutations_uniformly():
    # 3! outcomes from 6000 independent streams; each should land near 1000
    counts = {}
    for k in range(6000):
        p = tuple(shuffle(derive_stream(k, "perm"), [0, 1, 2]))
        counts[p] = counts.get(p, 0) + 1
    assert len(counts) == 6
    assert all(850 < c < 1150 for c in counts.values())


@given(st.lists(st.integers(), max_size=30), st.integers(0, 2**64 - 1))
def test_shuffle_is_a_permutation(items, seed):
    assert sorted(shuffle(derive_stream(seed, "p"), items)) == sorted(items)


def test_derived_seeds_are_64_bit_and_stable():
    s = derive_seed(7, "train/0")
    assert 0 <= s < 2**64
    assert s == derive_seed(7, "train/0") != derive_seed(7, "train/1")
