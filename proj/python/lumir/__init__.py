"""Pyramid-diffusion illumination correction.

Thin wrapper around the compiled _lumir extension; see the package README
for the end-to-end pipeline (datagen / train / restore / eval /
cluster-diagnose).
"""

try:
    from ._lumir import *  # noqa: F401,F403  (installed package layout)
    from ._lumir import __doc__ as _core_doc  # noqa: F401
except ImportError:  # build-tree layout: extension on PYTHONPATH
    from _lumir import *  # noqa: F401,F403
