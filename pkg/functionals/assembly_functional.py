"""
流水线冷却泛函 - 只激发能级 n*, 其余能级经 Raman 跃迁逐级下移

J_T = lambda_ss J_ss + lambda_leak J_leak + lambda_yield J~_yield + lambda_ass J_ass

J~_yield = 1 - sigma_{n*}
J_ass    = 1 - 1/(n_max - 1) sum_{n=2}^{n_max} g(<phi^g_{n-1}|psi_n(T)>),  g = Re 或 |.|^2

n_max < 2 时求和为空, J_ass 取 0; n_max = 0 时没有可激发的能级, J~_yield 取 1。
"""

import logging
from typing import Dict

import numpy as np

from functionals.terms import BaseFunctional, ASSEMBLY, MODULUS

logger = logging.getLogger(__name__)


class AssemblyFunctional(BaseFunctional):
    """流水线冷却泛函"""

    name = ASSEMBLY
    excitation_weights = {"J_yield": "lambda_yield", "J_ass": "lambda_ass"}

    def _shift_overlaps(self, amplitudes: np.ndarray) -> np.ndarray:
        # <phi^g_{n-1}|psi_n(T)>, n = 2..n_max
        n = np.arange(2, self.cfg.n_max + 1)
        return amplitudes[n - 1, n]

    def _excitation_terms(self, amplitudes: np.ndarray, sigma: np.ndarray) -> Dict[str, float]:
        n_max = self.cfg.n_max
        yield_term = 1.0 - float(sigma[self.cfg.n_star]) if n_max >= 1 else 1.0
        if n_max < 2:
            return {"J_yield": yield_term, "J_ass": 0.0}

        overlaps = self._shift_overlaps(amplitudes)
        if self.cfg.ass_form == MODULUS:
            transferred = np.abs(overlaps) ** 2
        else:
            transferred = np.real(overlaps)
        return {"J_yield": yield_term, "J_ass": 1.0 - float(np.sum(transferred)) / (n_max - 1)}

    def _excitation_gradient(self, amplitudes: np.ndarray, sigma: np.ndarray, gradient: np.ndarray):
        n_max = self.cfg.n_max
        if n_max == 0:
            return
        n_star = self.cfg.n_star
        gradient[:, n_star] -= self.weights["lambda_yield"] * self.ops.decay * amplitudes[:, n_star]
        if n_max < 2:
            return

        n = np.arange(2, n_max + 1)
        scale = self.weights["lambda_ass"] / (n_max - 1)
        if self.cfg.ass_form == MODULUS:
            gradient[n - 1, n] -= scale * self._shift_overlaps(amplitudes)
        else:
            gradient[n - 1, n] -= 0.5 * scale
