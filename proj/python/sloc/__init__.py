from ._sloc import *  # noqa: F401,F403
from ._sloc import __doc__  # noqa: F401
