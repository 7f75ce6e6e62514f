# ruff: noqa: F403 F401
from .context import *
