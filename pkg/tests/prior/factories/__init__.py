from .configs import *
