from .core import Tensor, Function, Tape, backward, no_grad, is_grad_enabled
from .ops import *
from .optim import *
from .gradcheck import finite_diff_check
