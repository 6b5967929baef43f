import os
import subprocess
import sys

import numpy as np
import pytest

from emperor import _pykernels, kernels


def test_available_and_get():
    assert "python" in kernels.available()
    assert kernels.get("python") is _pykernels
    assert kernels.get() is kernels.active
    with pytest.raises(ValueError):
        kernels.get("fortran")


def test_env_var_forces_python():
    code = "from emperor import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, EMPEROR_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("name", kernels.available())
def test_empty_component_keeps_tiny_weight(name):
    k = kernels.get(name)
    y = np.array([0.0, 0.1, -0.1, 0.05])
    w, mu, var = np.array([0.5, 0.5]), np.array([0.0, 1e4]), np.array([1.0, 1e-4])
    k.em_step(y, w, mu, var, 1e-12)
    assert w[1] > 0 and w[1] < 1e-12
    assert mu[1] == 1e4  # parameters of an empty component are kept
    assert abs(w.sum() - 1.0) < 1e-15


@pytest.mark.parametrize("name", kernels.available())
def test_starved_component_reseeded_once(name):
    k = kernels.get(name)
    y = np.concatenate([np.linspace(-1, 1, 50), [30.0]])
    w, mu, var = np.array([0.5, 0.5]), np.array([0.0, 1e3]), np.array([1.0, 1.0])
    trace = np.empty(20)
    reseeded = np.zeros(20, dtype=np.int8)
    total_var = float(np.var(y))
    its, conv, fh, ll = k.em_run(y, w, mu, var, 1e-6 * total_var, total_var, 20, 1e-10, trace, reseeded)
    assert reseeded[0] == 1 and reseeded[1:its].sum() == 0
    assert np.all(np.isfinite([ll, *w, *mu, *var]))
