import numpy as np
import pytest
import sympy as sp

from crossdiff.mms import ManufacturedSolution, convergence_study
from crossdiff.pressure import PressureLaw


def _sympy_source(kind, eta):
    t, x = sp.symbols("t x", real=True)
    r1 = 1 + sp.Rational(3, 10) * sp.cos(sp.pi * x) * sp.exp(-t)
    r2 = 1 - sp.Rational(1, 5) * sp.cos(2 * sp.pi * x) * sp.exp(-t)
    s = r1 + r2
    fp = sp.log(s) + 1 if kind == "log" else -1 / sp.sqrt(s)
    V1 = sp.Rational(1, 10) * sp.cos(sp.pi * x)
    V2 = -V1
    out = []
    for r, V in ((r1, V1), (r2, V2)):
        S = sp.diff(r, t) - eta * sp.diff(r, x, 2) - sp.diff(r * sp.diff(fp + V, x), x)
        out.append(sp.lambdify((t, x), S, "numpy"))
    return out


@pytest.mark.parametrize("kind", ["log", "power"])
def test_source_matches_symbolic_oracle(kind):
    law = PressureLaw.logarithmic(1.0) if kind == "log" else PressureLaw.power(0.5, 1.0)
    mms = ManufacturedSolution(law, eta=0.1)
    ref = _sympy_source(kind, sp.Rational(1, 10))
    x = np.linspace(0, 1, 41)
    for t in (0.0, 0.37):
        s1, s2 = mms.source(t, x)
        np.testing.assert_allclose(s1, ref[0](t, x), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(s2, ref[1](t, x), rtol=1e-12, atol=1e-12)


def test_exact_profiles_flat_at_walls():
    mms = ManufacturedSolution(PressureLaw.logarithmic(1.0))
    for i in (1, 2):
        np.testing.assert_allclose(mms.density(i, 0.2, np.array([0.0, 1.0]), 1), 0.0, atol=1e-15)


def test_convergence_order_short():
    errs, slope = convergence_study(ManufacturedSolution(PressureLaw.logarithmic(1.0)), (32, 64), T=0.01)
    assert errs[1] < errs[0]
    assert slope > 1.0
