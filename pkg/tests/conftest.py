import numpy as np
import pytest

from palign import IntegratorConfig, ModelParams, ParticleState


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(rng, n=8, d=2, vscale=1.0, spread=1.0):
    """Non-collisional random cloud (uniform positions, bounded speeds)."""
    x = rng.uniform(-spread, spread, (n, d))
    v = rng.uniform(-vscale, vscale, (n, d))
    return ParticleState(0.0, x, v)


@pytest.fixture
def tight_config():
    return IntegratorConfig(
        rel_tol=1e-10,
        abs_tol=1e-10,
        dt_init=1e-4,
        dt_max=5e-4,
        dt_min=1e-14,
        kappa=0.5,
    )


@pytest.fixture
def loose_config():
    return IntegratorConfig(
        rel_tol=1e-8,
        abs_tol=1e-8,
        dt_init=1e-3,
        dt_max=0.05,
        dt_min=1e-14,
        kappa=0.5,
    )


@pytest.fixture
def params23():
    return ModelParams(alpha=2.0, p=3.0, d=2, n_particles=8)
