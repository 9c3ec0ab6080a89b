from .errors import *
from .system import *
from .rng import *
from .cache import *
