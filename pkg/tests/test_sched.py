"""Phase lengths, grid sizes and the slot-to-phase map."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from ratebandit import DomainError
from ratebandit.sched import PhaseSchedule, first_stable_phase, grid_size, phase_length, phase_of, phase_start

PAPER = PhaseSchedule(0.04, 1 / 6)


def test_phase_length():
    assert [phase_length(l) for l in (1, 2, 10)] == [8, 16, 4096]
    with pytest.raises(DomainError):
        phase_length(0)
    with pytest.raises(DomainError):
        phase_length(61)


def test_grid_size_examples():
    assert grid_size(1, PAPER) == 1
    assert grid_size(10, PhaseSchedule(0.5, 1 / 6)) == 8
    assert grid_size(40, PAPER) == 656


def test_phase_of_examples():
    assert phase_of(8, PAPER) == (1, 8)
    assert phase_of(9, PAPER) == (2, 1)
    assert phase_of(1, PAPER) == (1, 1)
    with pytest.raises(DomainError):
        phase_of(0, PAPER)


def test_layout_is_inverse_of_phase_of():
    first = 1
    for l in range(1, 28):
        assert phase_start(l) + 1 == first
        assert phase_of(first, PAPER) == (l, 1)
        last = first + phase_length(l) - 1
        assert phase_of(last, PAPER) == (l, phase_length(l))
        first = last + 1
    assert phase_start(1) == 0


@given(st.integers(1, 2**30))
def test_phase_of_property(t):
    l, u = phase_of(t, PAPER)
    assert 1 <= u <= phase_length(l)
    assert phase_start(l) + u == t


@given(st.floats(1e-3, 0.999), st.floats(1e-3, 0.499))
def test_grid_size_positive_nondecreasing(C, delta):
    s = PhaseSchedule(C, delta)
    sizes = [s.grid_size(l) for l in range(1, 61)]
    assert sizes[0] >= 1
    assert all(a <= b for a, b in zip(sizes, sizes[1:]))


def test_first_stable_phase_examples():
    l, tsum = first_stable_phase(0.25, 2, PhaseSchedule(0.5, 1 / 6))
    assert l == 10
    assert tsum < 2 * 16**3
    s = PhaseSchedule(0.9, 0.1)
    l, _ = first_stable_phase(1.0, 2, s)
    brute = min(k for k in range(1, 61) if s.grid_size(k) >= 2)
    assert l == brute


@given(st.floats(0.01, 1.0), st.floats(1.01, 8.0), st.floats(0.01, 0.99), st.floats(0.01, 0.49))
def test_to_b_bound(eps, gamma, C, delta):
    s = PhaseSchedule(C, delta)
    ratio = gamma / (eps * C)
    if ratio ** (2 / (1 - 2 * delta)) > 2.0**55:
        return  # b would exceed the supported phase range
    l, tsum = s.first_stable_phase(eps, gamma)
    assert s.grid_size(l) >= gamma / eps * (1 - 1e-12)
    assert l == 1 or s.grid_size(l - 1) < gamma / eps
    assert tsum < 2 * ratio ** (2 / (1 - 2 * delta))


@pytest.mark.parametrize("C,delta", [(0.0, 0.2), (1.0, 0.2), (0.5, 0.0), (0.5, 0.5)])
def test_schedule_validation(C, delta):
    with pytest.raises(DomainError):
        PhaseSchedule(C, delta)
