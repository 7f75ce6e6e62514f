# ruff: noqa: F403

from .asset import *
from .config import *
from .controller import *
from .resource import *
from .translator import *
