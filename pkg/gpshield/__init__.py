from ._version import __version__  # noqa: F401
from .gpshield import GPShield  # noqa: F401
from .utils import set_log_level  # noqa: F401
from .utils._config import sys_info  # noqa: F401
