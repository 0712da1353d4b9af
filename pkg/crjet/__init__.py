from .errors import *
from .series import *
from .matrices import *
from .manifold import *
from .jets import *
from .invariants import *
from .segre import *
from .reflection import *
from .system import *
from .catalog import *
