import numpy as np


class Adam:
    """
    Adam with bias correction and coupled L2 weight decay (the decay is added to the gradient).

    Parameters are treated as values: :meth:`step` returns new arrays and never mutates its inputs.
    """

    def __init__(
        self,
        shapes: list[tuple],
        learning_rate: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ) -> None:
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.steps = 0
        self._m = [np.zeros(shape) for shape in shapes]
        self._v = [np.zeros(shape) for shape in shapes]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        """
        :param params: current parameter arrays.
        :type params: list[np.ndarray]
        :param grads: gradients with the same shapes.
        :type grads: list[np.ndarray]
        :return: updated parameters.
        :rtype: list[np.ndarray]
        """
        self.steps += 1
        bias1 = 1.0 - self.beta1**self.steps
        bias2 = 1.0 - self.beta2**self.steps
        updated = []
        for i, (p, g) in enumerate(zip(params, grads)):
            if self.weight_decay:
                g = g + self.weight_decay * p
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * g * g
            m_hat = self._m[i] / bias1
            v_hat = self._v[i] / bias2
            updated.append(p - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps))
        return updated
