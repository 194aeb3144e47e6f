"""Wheel build for the pdeopt extension.

CMake remains the primary build; this exists so `pip install .` works
without it. Sources mirror the pdeopt_core library plus the binding unit.
"""

import glob
import os

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup


def eigen_include():
    for candidate in (
        os.environ.get("EIGEN3_INCLUDE_DIR"),
        "/usr/include/eigen3",
        "/usr/local/include/eigen3",
    ):
        if candidate and os.path.isdir(candidate):
            return candidate
    raise RuntimeError("Eigen3 headers not found; set EIGEN3_INCLUDE_DIR")


core_sources = sorted(
    p for p in glob.glob("src/*.cpp") if not p.endswith("main.cpp")
)

ext = Pybind11Extension(
    "pdeopt._core",
    core_sources + ["bindings/module.cpp"],
    include_dirs=["include", "vendor", eigen_include()],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
