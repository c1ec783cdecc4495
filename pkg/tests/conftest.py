import numpy as np
import pytest

from hdgtransfer.geometry import kidney, unit_disk, unit_square
from hdgtransfer.material import lame_from_E_nu
from hdgtransfer.meshgen import build_fitted_disk_mesh, build_immersed_mesh, build_square_mesh


@pytest.fixture(scope="session")
def material():
    return lame_from_E_nu(1.0, 0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_cells(rng, n, scale_range=(0.05, 2.0), min_angle=20.0):
    """Shape-regular random triangles (counterclockwise)."""
    out = []
    while len(out) < n:
        tri = rng.uniform(-1, 1, size=(3, 2)) * rng.uniform(*scale_range) + rng.uniform(-3, 3, size=2)
        e = [tri[(i + 1) % 3] - tri[i] for i in range(3)]
        area = 0.5 * (e[0][0] * e[1][1] - e[0][1] * e[1][0])
        if area < 0:
            tri = tri[[0, 2, 1]]
        angles = []
        for i in range(3):
            a, b = tri[(i + 1) % 3] - tri[i], tri[(i + 2) % 3] - tri[i]
            angles.append(np.degrees(np.arccos(a @ b / np.linalg.norm(a) / np.linalg.norm(b))))
        if min(angles) >= min_angle:
            out.append(tri)
    return np.array(out)


DOMAIN_CASES = {
    "square": (unit_square, lambda: build_square_mesh(3)),
    "disk-fitted": (unit_disk, lambda: build_fitted_disk_mesh(2)),
    "disk-immersed": (unit_disk, lambda: build_immersed_mesh(unit_disk(), 10)),
    "kidney-immersed": (kidney, lambda: build_immersed_mesh(kidney(), 12)),
}
