import os
import subprocess
import sys

import pytest

from sobolev_growth import _sweep_py, kernels


def backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("SOBOLEV_GROWTH_PURE", None)
    if env_value is not None:
        env["SOBOLEV_GROWTH_PURE"] = env_value
    out = subprocess.run([sys.executable, "-c", "from sobolev_growth import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_environment_variable_forces_python():
    assert backend_in_subprocess("1") == "python"


def test_default_prefers_compiled():
    expected = "compiled" if kernels.compiled_sweep_canonical is not None else "python"
    assert backend_in_subprocess(None) == expected


@pytest.mark.skipif(kernels.compiled_sweep_canonical is None, reason="extension not built")
@pytest.mark.parametrize("J,alpha", [(1, 0.5), (2, 0.3), (17, 0.5), (40, 0.9)])
def test_backends_return_identical_reports(J, alpha):
    tol = 1e-12
    assert kernels.compiled_sweep_canonical(J, alpha, tol) == _sweep_py.sweep_canonical(J, alpha, tol)
