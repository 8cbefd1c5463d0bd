import math

import numpy as np
import pytest

from choquard.mesh import DomainSpec, MeshError, build_mesh, pair_weight, sphere_measure


def test_unit_interval_eight_cells(mesh8):
    assert mesh8.n_inside == 8
    assert mesh8.h == 0.125
    assert np.allclose(mesh8.interior[:, 0], (np.arange(8) + 0.5) / 8)


def test_ring_covers_padding(mesh8):
    ring = mesh8.ring[:, 0]
    assert mesh8.tail_radius == 4.0
    assert ring.min() == pytest.approx(-4 + 0.0625)
    assert ring.max() == pytest.approx(5 - 0.0625)
    assert np.all((ring < 0) | (ring > 1))
    assert len(ring) == 64


def test_disk_area_n16():
    m = build_mesh(DomainSpec.ball([0.0, 0.0], 1.0), 16)
    area = m.n_inside * m.cell_volume
    assert 0.95 * math.pi <= area <= 1.05 * math.pi


def test_disk_area_n64_within_five_percent():
    m = build_mesh(DomainSpec.ball([0.0, 0.0], 1.0), 64)
    assert abs(m.n_inside * m.cell_volume - math.pi) <= 0.05 * math.pi


def test_aligned_box_volume_is_exact():
    m = build_mesh(DomainSpec.box([0.0, 0.0], [1.0, 0.5]), 16)
    assert m.n_inside * m.cell_volume == pytest.approx(0.5, abs=1e-14)


def test_interior_nodes_inside_and_ring_outside():
    spec = DomainSpec.ball([0.2, -0.1], 0.7)
    m = build_mesh(spec, 16, pad_factor=1.0)
    assert spec.contains(m.interior).all()
    assert not spec.contains(m.ring).any()


def test_pair_weights(mesh8):
    assert pair_weight(mesh8, 0, 1) == 0.015625
    assert pair_weight(mesh8, 3, 3) == 0.0
    m2 = build_mesh(DomainSpec.box([0, 0], [1, 1]), 8)
    assert pair_weight(m2, 0, 5) == 2.44140625e-4


@pytest.mark.parametrize("n, pad", [(3, 4.0), (8, 0.5)])
def test_bad_parameters(unit_interval, n, pad):
    with pytest.raises(MeshError):
        build_mesh(unit_interval, n, pad)


@pytest.mark.parametrize(
    "make",
    [
        lambda: DomainSpec.box([0.0], [0.0]),
        lambda: DomainSpec.ball([0.0], -1.0),
        lambda: DomainSpec(N=3, lo=(0, 0, 0), hi=(1, 1, 1)),
    ],
)
def test_degenerate_domains(make):
    with pytest.raises(MeshError):
        make()


def test_sphere_measure():
    assert sphere_measure(1) == pytest.approx(2.0)
    assert sphere_measure(2) == pytest.approx(2 * math.pi)


def test_natural_grid_roundtrip(mesh8):
    g = mesh8.natural_grid.reshape(-1, 1)
    assert np.all(np.diff(g[:, 0]) > 0)
    assert np.array_equal(g[mesh8.perm], mesh8.nodes)


def test_midpoint_double_sum_converges_first_order(unit_interval):
    # smooth symmetric kernel exp(-(x-y)^2) on (0,1)^2
    exact = math.sqrt(math.pi) * math.erf(1.0) + math.exp(-1.0) - 1.0
    errs = []
    for n in (16, 32, 64):
        m = build_mesh(unit_interval, n)
        x = m.interior[:, 0]
        errs.append(abs(np.exp(-((x[:, None] - x[None, :]) ** 2)).sum() * m.h**2 - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.0)


def test_summary_mentions_padding(mesh8):
    assert "R_pad=4.0" in mesh8.summary()
