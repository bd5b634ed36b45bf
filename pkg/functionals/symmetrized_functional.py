"""
对称激发泛函 - 以相同效率激发系综中的所有能级

J_T = lambda_ss J_ss + lambda_leak J_leak + lambda_yield J_yield + lambda_sym J_sym

J_yield = 1 - sum_{n=1}^{n_max} sigma_n
J_sym   = sum_{n != n*} (sigma_n - sigma_n*)^2

注意: J_sym 不是凸的, 实际优化中非凸性很小, 由优化器的单调性检查兜底
"""

import logging
from typing import Dict

import numpy as np

from functionals.terms import BaseFunctional, SYMMETRIZED

logger = logging.getLogger(__name__)


class SymmetrizedFunctional(BaseFunctional):
    """对称激发泛函"""

    name = SYMMETRIZED
    excitation_weights = {"J_yield": "lambda_yield", "J_sym": "lambda_sym"}

    def _excitation_terms(self, amplitudes: np.ndarray, sigma: np.ndarray) -> Dict[str, float]:
        excited = sigma[1:]
        if excited.size == 0:
            return {"J_yield": 1.0, "J_sym": 0.0}
        reference = sigma[self.cfg.n_star]
        return {
            "J_yield": 1.0 - float(np.sum(excited)),
            "J_sym": float(np.sum((excited - reference) ** 2)),
        }

    def _excitation_gradient(self, amplitudes: np.ndarray, sigma: np.ndarray, gradient: np.ndarray):
        n_max = self.cfg.n_max
        if n_max == 0:
            return
        decayed = self.ops.decay[:, None] * amplitudes
        gradient[:, 1:] -= self.weights["lambda_yield"] * decayed[:, 1:]

        n_star = self.cfg.n_star
        deviation = sigma - sigma[n_star]
        deviation[0] = 0.0
        deviation[n_star] = 0.0
        prefactor = 2.0 * deviation
        prefactor[n_star] = -2.0 * np.sum(deviation)
        gradient[:, 1:] += self.weights["lambda_sym"] * prefactor[None, 1:] * decayed[:, 1:]
