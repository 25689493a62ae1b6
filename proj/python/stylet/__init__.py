from ._stylet import *  # noqa: F401,F403
