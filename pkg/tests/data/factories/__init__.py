from .clips import *
