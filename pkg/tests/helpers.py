"""Shared constructors for test scenarios."""
from crossdiff.config import Scenario
from crossdiff.pressure import PressureLaw
from crossdiff.solver import run

LOG = PressureLaw.logarithmic(1.0)
POW = PressureLaw.power(0.5, 1.0)
LAWS = {"log": LOG, "power": POW}


def make_config(preset="mixed_gaussians", law=LOG, eta=0.05, n=128, T=0.02, output_every=None, **kw):
    sc = Scenario(name=preset, law=law, n=n, L=1.0, eta=eta, T=T, preset=preset,
                  output_every=output_every, **kw)
    return sc.build()


def make_run(*args, **kw):
    return run(make_config(*args, **kw))
