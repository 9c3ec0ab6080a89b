from .graph import *
from .sampling import *
from .dataset import *
from .perturb import *
from .synth import *
