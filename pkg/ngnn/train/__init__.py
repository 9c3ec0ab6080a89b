from .config import *
from .metrics import *
from .drivers import *
