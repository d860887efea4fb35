"""
STAR-RIS coefficient matrices for the energy splitting (ES), mode switching (MS)
and time switching (TS) protocols.

Configurations are held per sub-surface and expanded to elements when the
diagonals are built. Constraint checks return a list of violations; only
build_matrices turns a violation into an exception.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np

from core.channel import PhaseSet, expand_groups
from core.errors import ProtocolConstraintError

SUM_TOL = 1e-12


class Protocol(str, Enum):
    ES = "ES"
    MS = "MS"
    TS = "TS"

    @classmethod
    def parse(cls, value: str) -> "Protocol":
        return cls(value.strip().upper())


@dataclass
class StarConfig:
    """
    Per-sub-surface STAR-RIS decision for one slot.

    Under TS one phase vector serves whichever mode is active, so phase_idx_t
    defaults to phase_idx_r. Amplitudes are ignored under TS and the mode bits
    are ignored under ES/MS.
    """

    kind: Protocol
    phase_idx_r: np.ndarray
    phase_idx_t: Optional[np.ndarray] = None
    amplitudes_r: Optional[np.ndarray] = None
    amplitudes_t: Optional[np.ndarray] = None
    lambda_r: int = 1
    lambda_t: Optional[int] = None

    def __post_init__(self):
        self.kind = Protocol(self.kind)
        self.phase_idx_r = np.asarray(self.phase_idx_r, dtype=int)
        if self.phase_idx_t is None:
            self.phase_idx_t = self.phase_idx_r.copy()
        self.phase_idx_t = np.asarray(self.phase_idx_t, dtype=int)
        if self.amplitudes_r is None:
            self.amplitudes_r = np.ones(len(self.phase_idx_r))
        self.amplitudes_r = np.asarray(self.amplitudes_r, dtype=float)
        if self.amplitudes_t is None:
            self.amplitudes_t = 1.0 - self.amplitudes_r
        self.amplitudes_t = np.asarray(self.amplitudes_t, dtype=float)
        if self.lambda_t is None:
            self.lambda_t = 1 - int(self.lambda_r)


@dataclass
class CoefficientMatrices:
    """Diagonals of Phi_r and Phi_t, one complex entry per element."""

    phi_r: np.ndarray
    phi_t: np.ndarray


@dataclass(frozen=True)
class Violation:
    constraint: str
    index: Optional[int]
    message: str

    def __str__(self) -> str:
        where = f"[{self.index}]" if self.index is not None else ""
        return f"{self.constraint}{where}: {self.message}"


def _is_binary(x) -> bool:
    return x == 0 or x == 1


def validate(cfg: StarConfig, phase_set: Optional[PhaseSet] = None) -> List[Violation]:
    """
    Check the protocol's constraint row.

    ES: beta in [0, 1] and beta_t + beta_r = 1 per sub-surface.
    MS: beta binary and beta_t + beta_r = 1.
    TS: lambda binary and lambda_t + lambda_r = 1.

    Args:
        cfg: Configuration to check
        phase_set: When given, phase indices are also range-checked

    Returns:
        Every violation found; an empty list means the configuration is valid
    """
    violations: List[Violation] = []
    n_sub = len(cfg.phase_idx_r)
    if len(cfg.phase_idx_t) != n_sub:
        violations.append(Violation("shape", None, "reflection and transmission phase counts differ"))
    if phase_set is not None:
        levels = len(phase_set)
        for name, idx in (("phase_r", cfg.phase_idx_r), ("phase_t", cfg.phase_idx_t)):
            for i in np.flatnonzero((idx < 0) | (idx >= levels)):
                violations.append(Violation(name, int(i), f"index {idx[i]} outside [0, {levels})"))

    if cfg.kind is Protocol.TS:
        if not _is_binary(cfg.lambda_r) or not _is_binary(cfg.lambda_t):
            violations.append(Violation("mode", None, "mode bits must be binary"))
        if cfg.lambda_r + cfg.lambda_t != 1:
            violations.append(Violation("mode_sum", None, "lambda_t + lambda_r must equal 1"))
        return violations

    beta_r, beta_t = cfg.amplitudes_r, cfg.amplitudes_t
    if len(beta_r) != n_sub or len(beta_t) != n_sub:
        violations.append(Violation("shape", None, "amplitude count differs from phase count"))
        return violations
    for i in range(n_sub):
        if cfg.kind is Protocol.MS:
            if not (_is_binary(beta_r[i]) and _is_binary(beta_t[i])):
                violations.append(Violation("amplitude", i, "amplitude not binary"))
        elif not (0.0 <= beta_r[i] <= 1.0 and 0.0 <= beta_t[i] <= 1.0):
            violations.append(Violation("amplitude", i, "amplitude outside [0, 1]"))
        if abs(beta_r[i] + beta_t[i] - 1.0) > SUM_TOL:
            violations.append(Violation("amplitude_sum", i, "beta_t + beta_r must equal 1"))
    return violations


def build_matrices(cfg: StarConfig, phase_set: PhaseSet, N: int) -> CoefficientMatrices:
    """
    Expand a validated configuration into element-level diagonals.

    ES/MS entries are sqrt(beta) e^{j phi}; TS entries are lambda e^{j phi}.

    Raises:
        ProtocolConstraintError: listing every violation, if any
    """
    violations = validate(cfg, phase_set)
    if violations:
        raise ProtocolConstraintError(violations)

    phase_r = expand_groups(phase_set.values[cfg.phase_idx_r], N)
    phase_t = expand_groups(phase_set.values[cfg.phase_idx_t], N)
    if cfg.kind is Protocol.TS:
        amp_r = np.full(N, float(cfg.lambda_r))
        amp_t = np.full(N, float(cfg.lambda_t))
    else:
        amp_r = np.sqrt(expand_groups(cfg.amplitudes_r, N))
        amp_t = np.sqrt(expand_groups(cfg.amplitudes_t, N))
    return CoefficientMatrices(phi_r=amp_r * np.exp(1j * phase_r), phi_t=amp_t * np.exp(1j * phase_t))


def ts_serving_indicator(lambda_r, u_k):
    """i_k = XNOR(lambda_r, u_k): 1 when the active TS mode faces the UD's side."""
    served = 1 - np.bitwise_xor(np.asarray(lambda_r, dtype=int), np.asarray(u_k, dtype=int))
    return int(served) if np.ndim(served) == 0 else served
