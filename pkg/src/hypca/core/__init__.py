from .tensor import Parameter, Tape, Tensor, no_tape
from .gradcheck import grad_check

__all__ = ["Tensor", "Parameter", "Tape", "no_tape", "grad_check"]
