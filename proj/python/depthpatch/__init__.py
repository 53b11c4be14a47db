"""Adversarial patches against monocular depth estimation."""

try:
    from ._depthpatch import *  # noqa: F401,F403
    from ._depthpatch import __version__  # noqa: F401
except ImportError:  # building in-tree: the module sits on PYTHONPATH
    from _depthpatch import *  # noqa: F401,F403
    from _depthpatch import __version__  # noqa: F401
