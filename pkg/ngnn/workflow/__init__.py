from .config import *
from .report import *
from .runs import *
from .sweeps import *
