import glob
import os

from pybind11.setup_helpers import ParallelCompile, Pybind11Extension, build_ext
from setuptools import setup

# The extension compiles the whole C++ core alongside the bindings, so the
# python package needs no separately built shared library.
sources = sorted(glob.glob("src/**/*.cpp", recursive=True)) + ["python/bindings.cpp"]

include_dirs = ["include", "vendor"]
if os.path.isdir("/usr/include/eigen3"):
    include_dirs.append("/usr/include/eigen3")

ext = Pybind11Extension(
    "scenegen._scenegen",
    sources,
    include_dirs=include_dirs,
    cxx_std=20,
    # Contraction off keeps results identical to the test binaries, which
    # compare some quantities bit-for-bit across translation units.
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

ParallelCompile("SCENEGEN_BUILD_JOBS").install()

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
