class Dual:
    """
    Forward-mode pair ``(primal, tangent)``.

    ``tangent`` may carry leading direction axes: a primal of shape ``(B, d)``
    with a tangent of shape ``(k, B, d)`` propagates ``k`` directions at once.
    ``None`` is a symbolic zero tangent. Both components may be taped Vars.
    """

    __slots__ = ("primal", "tangent")
    __array_ufunc__ = None

    def __init__(self, primal, tangent=None) -> None:
        self.primal = primal
        self.tangent = tangent

    @property
    def shape(self) -> tuple:
        return tuple(self.primal.shape)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def __repr__(self) -> str:
        tangent = None if self.tangent is None else tuple(self.tangent.shape)
        return f"Dual(shape={self.shape}, tangent={tangent})"
