"""First/second-moment adaptive optimizer over named parameter arrays."""

from __future__ import annotations

import numpy as np


class Adam:
    """Adam with per-call learning rates and float64 moment buffers."""

    def __init__(self, params: dict[str, np.ndarray], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-15):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.exp_avg = {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}
        self.exp_avg_sq = {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}

    def step(
        self,
        params: dict[str, np.ndarray],
        grads: dict[str, np.ndarray],
        lrs: dict[str, float],
    ) -> None:
        """Update params in place; every parameter class steps every call."""
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for name, p in params.items():
            g = grads[name]
            m = self.exp_avg[name]
            v = self.exp_avg_sq[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lrs[name] * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for k, v in self.exp_avg.items():
            out[f"exp_avg.{k}"] = v
        for k, v in self.exp_avg_sq.items():
            out[f"exp_avg_sq.{k}"] = v
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], step_count: int) -> None:
        self.step_count = int(step_count)
        for k in self.exp_avg:
            self.exp_avg[k] = np.asarray(arrays[f"exp_avg.{k}"], dtype=np.float64)
            self.exp_avg_sq[k] = np.asarray(arrays[f"exp_avg_sq.{k}"], dtype=np.float64)
