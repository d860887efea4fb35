"""
Computation and energy model plus the closed-form and Dinkelbach allocators.

Given an offloading fraction and an effective channel, these functions complete
an MDP action: minimum power for finishing within the slot, the power that
minimizes offload energy, and the cycle-level local/edge CPU frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from core.channel import achievable_rate
from core.errors import ConfigurationError, DinkelbachPreconditionError, InfeasibleOffloadError
from core.scenario import ScenarioConfig
from utils.console import get_logger

logger = get_logger(__name__)

LN2 = math.log(2.0)
FEASIBILITY_RTOL = 1e-9


@dataclass
class OffloadDecision:
    """Offload fractions alpha_k[q], one row per UD and one column per slot."""

    alphas: np.ndarray

    @property
    def eta(self) -> np.ndarray:
        return self.alphas.sum(axis=1)

    def is_valid(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.alphas >= 0.0) and np.all(self.eta <= 1.0 + tol))


@dataclass
class AllocationResult:
    """Per-UD, per-slot completion of an offload decision."""

    alpha: float
    requested_alpha: float
    p: float
    p_hat: float
    t_off: float
    e_off: float
    clipped: bool = False

    @property
    def offload_feasible(self) -> bool:
        return not self.clipped


@dataclass
class CycleAllocation:
    """Per-UD cycle-level completion: CPU frequencies and local energy."""

    eta: float
    f_loc: float
    f_edge: float
    e_loc: float
    local_feasible: bool


@dataclass
class DinkelbachResult:
    power: float
    y_history: List[float] = field(default_factory=list)
    residual: float = 0.0
    iterations: int = 0


def offload_time_energy(alpha: float, D_k: float, R_k: float, p_k: float) -> Tuple[float, float]:
    """
    Offload time alpha D / R and energy t p.

    Raises:
        InfeasibleOffloadError: if alpha > 0 over a zero-rate link
    """
    if alpha == 0.0:
        return 0.0, 0.0
    if R_k <= 0.0:
        raise InfeasibleOffloadError(f"cannot offload fraction {alpha} at rate {R_k}")
    t_off = alpha * D_k / R_k
    return t_off, t_off * p_k


def optimal_local_freq(D_k: float, C_k: float, eta: float, T: float) -> float:
    """Slowest local frequency that still finishes (1 - eta) D C cycles within T."""
    return D_k * C_k * (1.0 - eta) / T


def local_energy(c_loc: float, f_loc: float, D_k: float, C_k: float, eta: float) -> float:
    """E_loc = c f^2 D C (1 - eta)."""
    return c_loc * f_loc ** 2 * D_k * C_k * (1.0 - eta)


def local_feasible(f_loc: float, f_max_loc: float) -> bool:
    return f_loc <= f_max_loc * (1.0 + FEASIBILITY_RTOL)


def optimal_edge_freq(D_k: float, C_k: float, eta: float, Q: int, tau: float) -> float:
    """Edge frequency that finishes the offloaded part within the last Q - 1 slots."""
    if Q < 2:
        raise ConfigurationError("Q", "edge execution window needs Q >= 2")
    return D_k * C_k * eta / ((Q - 1) * tau)


def min_power(alpha: float, D_k: float, B_k: float, tau: float, h_k: complex, sigma2: float) -> float:
    """
    Smallest power that offloads alpha D bits within one slot.

    Raises:
        InfeasibleOffloadError: if alpha > 0 and the channel is zero
    """
    if alpha == 0.0:
        return 0.0
    gain = abs(h_k) ** 2
    if gain == 0.0:
        raise InfeasibleOffloadError("zero effective channel")
    exponent = alpha * D_k / (tau * B_k) * LN2
    if exponent > 700.0:
        return math.inf
    return sigma2 * math.expm1(exponent) / gain


def max_offload_ratio(p_max: float, h_k: complex, sigma2: float, B_k: float, tau: float,
                      D_k: float) -> float:
    """Fraction offloadable within one slot at p_max, capped at 1."""
    gain = abs(h_k) ** 2
    if gain == 0.0:
        return 0.0
    return min(1.0, tau * B_k * math.log2(1.0 + p_max * gain / sigma2) / D_k)


def _offload_energy_ratio(p: float, load: float, B_k: float, snr_per_watt: float) -> float:
    return load * p / (B_k * math.log2(1.0 + p * snr_per_watt))


def dinkelbach_solve(alpha: float, D_k: float, B_k: float, h_k: complex, sigma2: float,
                     p_hat: float, p_max: float, eps: float = 1e-8,
                     t_max: int = 50) -> DinkelbachResult:
    """
    Minimize alpha D p / (B log2(1 + p |h|^2 / sigma^2)) over [p_hat, p_max].

    Each inner problem min_p alpha D p - y B log2(1 + p c) is convex in p and is
    solved by its clamped stationary point p = y B / (alpha D ln 2) - 1 / c.

    Args:
        alpha: Offload fraction of this slot, strictly positive
        D_k: Task size (bits)
        B_k: Per-UD bandwidth (Hz)
        h_k: Effective channel
        sigma2: Noise power (W)
        p_hat: Minimum power from min_power
        p_max: Power budget
        eps: Absolute residual tolerance of the stopping rule
        t_max: Iteration cap

    Returns:
        DinkelbachResult with the power, the y sequence, final residual and
        iteration count

    Raises:
        DinkelbachPreconditionError: if p_hat > p_max or alpha <= 0
    """
    if alpha <= 0.0:
        raise DinkelbachPreconditionError("alpha must be positive")
    if p_hat > p_max:
        raise DinkelbachPreconditionError(f"p_hat={p_hat} exceeds p_max={p_max}")
    c = abs(h_k) ** 2 / sigma2
    load = alpha * D_k

    p = p_hat
    y = _offload_energy_ratio(p, load, B_k, c)
    result = DinkelbachResult(power=p, y_history=[y])
    for t in range(1, t_max + 1):
        stationary = y * B_k / (load * LN2) - 1.0 / c
        p = min(max(stationary, p_hat), p_max)
        residual = abs(load * p - y * B_k * math.log2(1.0 + p * c))
        result.power, result.residual, result.iterations = p, residual, t
        if residual <= eps:
            break
        y_next = _offload_energy_ratio(p, load, B_k, c)
        if y_next > y * (1.0 + 1e-12):
            logger.warning("Dinkelbach y increased from %r to %r", y, y_next)
        y = y_next
        result.y_history.append(y)
    logger.debug("Dinkelbach finished in %d iteration(s), p=%.6g W", result.iterations, result.power)
    return result


def dinkelbach_power(alpha: float, D_k: float, B_k: float, h_k: complex, sigma2: float,
                     p_hat: float, p_max: float, eps: float = 1e-8, t_max: int = 50) -> float:
    """Power minimizing the slot's offload energy; see dinkelbach_solve."""
    return dinkelbach_solve(alpha, D_k, B_k, h_k, sigma2, p_hat, p_max, eps, t_max).power


def allocate_slot(alpha: float, h_k: complex, config: ScenarioConfig,
                  eps: float = 1e-8, t_max: int = 50) -> AllocationResult:
    """
    Complete one UD's slot decision.

    If the minimum power exceeds p_max the UD transmits at p_max and the
    fraction is clipped to max_offload_ratio; the clipped part is not moved to
    other slots. Otherwise the power comes from the Dinkelbach solver.
    """
    B_k, tau, D = config.bandwidth_per_ud, config.tau, config.task_size
    if alpha <= 0.0:
        return AllocationResult(alpha=0.0, requested_alpha=alpha, p=0.0, p_hat=0.0, t_off=0.0, e_off=0.0)

    if abs(h_k) == 0.0:
        logger.debug("zero channel, clipping alpha=%.4f to 0", alpha)
        return AllocationResult(alpha=0.0, requested_alpha=alpha, p=0.0, p_hat=math.inf,
                                t_off=0.0, e_off=0.0, clipped=True)

    p_hat = min_power(alpha, D, B_k, tau, h_k, config.sigma2)
    if p_hat > config.p_max:
        clipped_alpha = max_offload_ratio(config.p_max, h_k, config.sigma2, B_k, tau, D)
        logger.debug("p_hat=%.3g W above p_max, clipping alpha %.4f -> %.4f", p_hat, alpha, clipped_alpha)
        power = config.p_max if clipped_alpha > 0.0 else 0.0
        rate = achievable_rate(h_k, power, B_k, config.sigma2)
        t_off, e_off = offload_time_energy(clipped_alpha, D, rate, power)
        return AllocationResult(alpha=clipped_alpha, requested_alpha=alpha, p=power, p_hat=p_hat,
                                t_off=t_off, e_off=e_off, clipped=True)

    power = dinkelbach_power(alpha, D, B_k, h_k, config.sigma2, p_hat, config.p_max, eps, t_max)
    rate = achievable_rate(h_k, power, B_k, config.sigma2)
    t_off, e_off = offload_time_energy(alpha, D, rate, power)
    return AllocationResult(alpha=alpha, requested_alpha=alpha, p=power, p_hat=p_hat,
                            t_off=t_off, e_off=e_off)


def allocate_cycle(eta: float, config: ScenarioConfig) -> CycleAllocation:
    """Local/edge frequencies and local energy for a UD that offloaded eta in total."""
    D, C = config.task_size, config.cycles_per_bit
    eta = min(max(eta, 0.0), 1.0)
    f_loc = optimal_local_freq(D, C, eta, config.T)
    f_edge = optimal_edge_freq(D, C, eta, config.Q, config.tau)
    return CycleAllocation(
        eta=eta,
        f_loc=f_loc,
        f_edge=f_edge,
        e_loc=local_energy(config.c_loc, f_loc, D, C, eta),
        local_feasible=local_feasible(f_loc, config.f_max_loc),
    )


def per_ud_energy(slot_results: Sequence[Sequence[AllocationResult]],
                  cycle_results: Sequence[CycleAllocation]) -> np.ndarray:
    """E_k = E_loc + sum over offloading slots of E_off; slot_results is indexed [slot][ud]."""
    energies = np.array([c.e_loc for c in cycle_results], dtype=float)
    for slot in slot_results:
        for k, result in enumerate(slot):
            energies[k] += result.e_off
    return energies


def total_energy(slot_results: Sequence[Sequence[AllocationResult]],
                 cycle_results: Sequence[CycleAllocation]) -> float:
    """System energy, the sum of per-UD energies."""
    return float(per_ud_energy(slot_results, cycle_results).sum())
