"""
Optimizers - Gradient descent loop shared by every learner

Plain gradient descent with a fixed (optionally decaying) learning rate is
the default; Adam is available behind ``optimizer="adam"``.
"""

from typing import Callable, Dict, Optional, Tuple
import logging
import math

import numpy as np

from .errors import ConfigError, DivergenceError
from .training_trace import TrainingTrace

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6

ValueAndGrad = Callable[[np.ndarray], Tuple[float, np.ndarray]]
Monitor = Callable[[int, np.ndarray], Dict[str, Optional[float]]]


class GradientDescent:
    """x <- x - lr * decay^epoch * g."""

    def __init__(self, learning_rate: float, lr_decay: float = 1.0):
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay

    def step(self, params: np.ndarray, grad: np.ndarray, epoch: int) -> np.ndarray:
        return params - self.learning_rate * (self.lr_decay ** epoch) * grad


class Adam:
    """
    Adam with bias correction.

    Attributes:
        learning_rate: Base step size
        beta1, beta2: Moment decay rates
    """

    def __init__(self, learning_rate: float, lr_decay: float = 1.0,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-12):
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: Optional[np.ndarray] = None
        self._v: Optional[np.ndarray] = None

    def step(self, params: np.ndarray, grad: np.ndarray, epoch: int) -> np.ndarray:
        if self._m is None:
            self._m = np.zeros_like(params)
            self._v = np.zeros_like(params)
        self._m = self.beta1 * self._m + (1 - self.beta1) * grad
        self._v = self.beta2 * self._v + (1 - self.beta2) * grad ** 2
        m_hat = self._m / (1 - self.beta1 ** (epoch + 1))
        v_hat = self._v / (1 - self.beta2 ** (epoch + 1))
        lr = self.learning_rate * (self.lr_decay ** epoch)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(name: str, learning_rate: float, lr_decay: float = 1.0):
    if name == "gd":
        return GradientDescent(learning_rate, lr_decay)
    if name == "adam":
        return Adam(learning_rate, lr_decay)
    raise ConfigError(f"Unknown optimizer {name!r}; expected 'gd' or 'adam'")


def optimize(
    value_and_grad: ValueAndGrad,
    x0: np.ndarray,
    learning_rate: float,
    max_epochs: int,
    cost_threshold: float = 0.0,
    lr_decay: float = 1.0,
    optimizer: str = "gd",
    monitor: Optional[Monitor] = None,
    monitor_every: int = 1,
    trace: Optional[TrainingTrace] = None,
    log_every: int = 10,
    name: str = "train",
) -> TrainingTrace:
    """
    Run gradient descent until the cost threshold or the epoch cap.

    Args:
        value_and_grad: params -> (cost, gradient)
        x0: Initial parameters
        learning_rate: Step size (> 0)
        max_epochs: Maximum number of parameter updates
        cost_threshold: Stop once the cost drops below this
        lr_decay: Geometric learning-rate decay per epoch
        optimizer: "gd" or "adam"
        monitor: (epoch, params) -> extra trace fields (trace_distance, validation_error)
        monitor_every: Call the monitor every this many epochs (and at the end)
        trace: Trace to append to; a new one is created when omitted
        log_every: INFO log period in epochs
        name: Label used in log lines

    Returns:
        TrainingTrace with epoch 0 holding the initial point

    Raises:
        DivergenceError: Non-finite cost, or cost above 1e6 x the initial cost
    """
    if not learning_rate > 0:
        raise ConfigError(f"learning_rate must be positive, got {learning_rate}")
    trace = trace if trace is not None else TrainingTrace()
    opt = make_optimizer(optimizer, learning_rate, lr_decay)
    params = np.array(x0, dtype=float).reshape(-1)

    def extras(epoch: int, force: bool) -> Dict[str, Optional[float]]:
        if monitor is None or not (force or epoch % monitor_every == 0):
            return {}
        return monitor(epoch, params)

    cost, grad = value_and_grad(params)
    if not math.isfinite(cost):
        raise DivergenceError(f"{name}: initial cost is not finite")
    initial = cost
    limit = DIVERGENCE_FACTOR * initial if initial > 0 else math.inf
    trace.record(0, cost, params, **extras(0, max_epochs == 0 or cost < cost_threshold))
    trace.stop_reason = "epoch cap"
    for epoch in range(1, max_epochs + 1):
        if cost < cost_threshold:
            break
        params = opt.step(params, grad, epoch - 1)
        cost, grad = value_and_grad(params)
        if not math.isfinite(cost) or not np.all(np.isfinite(grad)) or cost > limit:
            raise DivergenceError(
                f"{name}: cost {cost:.3e} at epoch {epoch} diverged from initial {initial:.3e}"
            )
        last = epoch == max_epochs or cost < cost_threshold
        trace.record(epoch, cost, params, **extras(epoch, last))
        if epoch % log_every == 0:
            logger.info("%s epoch %d cost %.6e", name, epoch, cost)
    if cost < cost_threshold:
        trace.stop_reason = "converged"
    logger.info("%s finished after %d epochs (%s), cost %.6e",
                name, trace.epochs, trace.stop_reason, cost)
    return trace
