import pytest
from hypothesis import given, settings, strategies as st

from uavfleet import compute
from uavfleet.scenario import (ComputeParams, LearnParams, Task, TaskClass,
                               TaskValueParams, UavSpec)

PARAMS = ComputeParams()
LEARN = LearnParams()
UAV = UavSpec(home_station=0)


def _task(size, cls=TaskClass.UAV_VIDEO):
    return Task(id=0, position=(0, 0, 0), task_class=cls, priority=3,
                data_size_bytes=size, dwell_time_s=0.0,
                value_params=TaskValueParams())


def test_flops_oracle():
    assert compute.task_flops(_task(150e6), 1.0, PARAMS) == pytest.approx(
        39000000000000.0, rel=1e-9)
    assert compute.task_flops(_task(150e6), 0.5, PARAMS) == pytest.approx(
        19500000000000.0, rel=1e-9)
    assert compute.task_flops(_task(8e6, TaskClass.SENSOR_DATA), 0.25, PARAMS) \
        == pytest.approx(0.25 * 1e3 * 8e6, rel=1e-9)


def test_capacity_oracle():
    assert compute.uav_capacity(UAV) == pytest.approx(28800000000.0, rel=1e-12)


def test_delay_oracle():
    flops = compute.task_flops(_task(150e6), 1.0, PARAMS)
    assert compute.processing_delay(flops, UAV, PARAMS) == pytest.approx(
        1354.2666666666667, rel=1e-9)


def test_processing_energy_and_residual_oracle():
    t = _task(150e6)
    assert compute.processing_energy(t, 0.5, LEARN) == pytest.approx(750.0, rel=1e-9)
    assert compute.residual_storage(t, 0.5) == pytest.approx(75000000.0, rel=1e-12)
    assert compute.residual_storage(t, 1.0) == 0.0


def test_beta_bounds_rejected():
    with pytest.raises(compute.ComputeDomainError):
        compute.task_flops(_task(1e6), 1.5, PARAMS)
    with pytest.raises(compute.ComputeDomainError):
        compute.processing_energy(_task(1e6), -0.1, LEARN)


def test_greedy_beta_limits():
    t = _task(150e6)   # full processing needs 1500 J and 3.9e13 FLOPs
    assert compute.greedy_beta(t, 1e9, 1e20, PARAMS, LEARN) == 1.0
    assert compute.greedy_beta(t, 750.0, 1e20, PARAMS, LEARN) == pytest.approx(0.5)
    assert compute.greedy_beta(t, 1e9, 1.95e13, PARAMS, LEARN) == pytest.approx(0.5)
    assert compute.greedy_beta(t, 0.0, 1e20, PARAMS, LEARN) == 0.0
    assert compute.greedy_beta(t, -5.0, 1e20, PARAMS, LEARN) == 0.0


@settings(max_examples=80, deadline=None)
@given(size=st.floats(1e6, 5e8), energy=st.floats(0, 3e4), flops=st.floats(0, 1e14))
def test_greedy_beta_never_overspends(size, energy, flops):
    t = _task(size)
    b = compute.greedy_beta(t, energy, flops, PARAMS, LEARN)
    assert 0.0 <= b <= 1.0
    assert compute.processing_energy(t, b, LEARN) <= energy * (1 + 1e-12) + 1e-9
    assert compute.task_flops(t, b, PARAMS) <= flops * (1 + 1e-12) + 1e-3


def test_make_plan_consistency():
    t = _task(100e6)
    plan = compute.make_plan(t, 0.5, UAV, PARAMS, LEARN)
    assert plan.flops_required == compute.task_flops(t, 0.5, PARAMS)
    assert plan.residual_bytes == 50e6
    assert plan.delay_s > PARAMS.overhead_s


def test_gamma_fit_from_bundled_timing_table():
    import importlib.resources as res
    with res.as_file(res.files("uavfleet") / "data" / "yolo_pi_timing.csv") as p:
        gamma = compute.fit_gamma_from_timing(p, UAV)
    assert gamma == pytest.approx(2.6e5, rel=1e-3)


def test_gamma_fit_rejects_empty(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("video_length_s,measured_delay_s\n")
    with pytest.raises(compute.ComputeDomainError):
        compute.fit_gamma_from_timing(p, UAV)
