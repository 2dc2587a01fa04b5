"""Onboard computation model: FLOPs, capacity, delay, processing energy, storage.

The processed fraction beta doubles as the stored-size reduction p: whatever
part of a task is processed onboard both costs FLOPs/energy and shrinks the
payload kept in storage.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .scenario import ComputeParams, LearnParams, Task, UavSpec


class ComputeDomainError(ValueError):
    pass


@dataclass
class ProcessingPlan:
    task_id: int
    beta_onboard: float
    flops_required: float
    delay_s: float
    energy_J: float
    residual_bytes: float


def task_flops(task: Task, beta: float, params: ComputeParams) -> float:
    """FLOPs to process fraction beta of a task: beta * gamma_class * bytes."""
    if not (0.0 <= beta <= 1.0):
        raise ComputeDomainError(f"beta must be in [0, 1], got {beta}")
    return beta * params.gamma(task.task_class) * task.data_size_bytes


def uav_capacity(uav: UavSpec) -> float:
    """Aggregate onboard throughput: cores * clock * FLOPs-per-cycle."""
    return uav.n_cores * uav.cpu_hz * uav.flops_per_cycle


def processing_delay(flops: float, uav: UavSpec, params: ComputeParams) -> float:
    """Wall time for a workload, plus fixed system overhead."""
    if flops < 0:
        raise ComputeDomainError("flops must be >= 0")
    cap = uav_capacity(uav)
    if cap <= 0:
        raise ComputeDomainError("UAV has zero processing capacity")
    return flops / cap + params.overhead_s


def processing_energy(task: Task, p_fraction: float, learn: LearnParams) -> float:
    """Energy to process fraction p of the payload at e_process J/byte."""
    if not (0.0 <= p_fraction <= 1.0):
        raise ComputeDomainError(f"p_fraction must be in [0, 1], got {p_fraction}")
    return task.data_size_bytes * p_fraction * learn.process_energy_per_byte


def residual_storage(task: Task, p_fraction: float) -> float:
    """Bytes left to store after processing fraction p onboard."""
    if not (0.0 <= p_fraction <= 1.0):
        raise ComputeDomainError(f"p_fraction must be in [0, 1], got {p_fraction}")
    return task.data_size_bytes * (1.0 - p_fraction)


def greedy_beta(task: Task, remaining_process_J: float, remaining_flops: float,
                params: ComputeParams, learn: LearnParams) -> float:
    """Largest onboard fraction the remaining energy and FLOPs budgets allow."""
    full_energy = processing_energy(task, 1.0, learn)
    full_flops = task_flops(task, 1.0, params)
    beta = 1.0
    if full_energy > 0:
        beta = min(beta, max(0.0, remaining_process_J) / full_energy)
    if full_flops > 0:
        beta = min(beta, max(0.0, remaining_flops) / full_flops)
    return min(1.0, beta)


def make_plan(task: Task, beta: float, uav: UavSpec, params: ComputeParams,
              learn: LearnParams) -> ProcessingPlan:
    flops = task_flops(task, beta, params)
    return ProcessingPlan(
        task_id=task.id,
        beta_onboard=beta,
        flops_required=flops,
        delay_s=processing_delay(flops, uav, params),
        energy_J=processing_energy(task, beta, learn),
        residual_bytes=residual_storage(task, beta),
    )


def fit_gamma_from_timing(csv_path, uav: UavSpec, bytes_per_video_second: float = 1.67e6,
                          overhead_s: float = 0.1) -> float:
    """Fit the video FLOPs/byte factor from a (video_length_s, measured_delay_s) table.

    Least squares through the origin on delay-minus-overhead vs bytes, scaled by
    the UAV capacity: delay = gamma * bytes / capacity + overhead.
    """
    xs, ys = [], []
    with open(csv_path) as fh:
        for row in csv.DictReader(fh):
            length = float(row["video_length_s"])
            delay = float(row["measured_delay_s"])
            xs.append(length * bytes_per_video_second)
            ys.append(max(0.0, delay - overhead_s))
    if not xs:
        raise ComputeDomainError(f"no rows in timing fixture {csv_path}")
    num = sum(x * y for x, y in zip(xs, ys))
    den = sum(x * x for x in xs)
    return uav_capacity(uav) * num / den
