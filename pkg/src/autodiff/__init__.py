from autodiff.dual import Dual
from autodiff.functional import jacobian, jvp, vjp
from autodiff.tape import Grad, Tape, Var

__all__ = ["Dual", "Grad", "Tape", "Var", "jacobian", "jvp", "vjp"]
