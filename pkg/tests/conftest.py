import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit_quat(rng, n=None):
    q = rng.normal(size=(4,) if n is None else (n, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def random_soup(rng, n_tri, spread=1.0, size=0.3):
    """Random triangle soup: centres in a cube, vertices jittered around them."""
    from depthsim.geometry import TriangleMesh

    centres = rng.uniform(-spread, spread, size=(n_tri, 1, 3))
    verts = (centres + rng.normal(scale=size, size=(n_tri, 3, 3))).reshape(-1, 3)
    faces = np.arange(3 * n_tri).reshape(-1, 3)
    return TriangleMesh(verts, faces)


def random_rays(rng, n, spread=1.5):
    origins = rng.uniform(-spread, spread, size=(n, 3))
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return origins, dirs
