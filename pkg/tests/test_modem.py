"""Constellation geometry, Gray labeling, classes, and detection."""

import numpy as np
import pytest

from slprecode import modem
from slprecode.modem import ClassKind, Scheme


ALL_NAMES = ["bpsk", "qpsk", "4qam", "8psk", "8qam", "16qam", "16psk",
             "16apsk", "64qam"]


@pytest.mark.parametrize("name", ALL_NAMES)
def test_unit_average_energy(name):
    c = modem.constellation_from_name(name)
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("name", ALL_NAMES)
def test_order_and_unique_points(name):
    c = modem.constellation_from_name(name)
    assert len(c.points) == c.order
    assert len(np.unique(np.round(c.points, 9))) == c.order


@pytest.mark.parametrize("name", ALL_NAMES)
def test_labels_are_a_permutation(name):
    c = modem.constellation_from_name(name)
    assert sorted(c.labels) == list(range(c.order))


@pytest.mark.parametrize("name", ["bpsk", "qpsk", "8psk", "16psk"])
def test_psk_gray_adjacent_labels_differ_one_bit(name):
    c = modem.constellation_from_name(name)
    order = np.argsort(np.angle(c.points))
    labels = np.asarray(c.labels)[order]
    for i in range(len(labels)):
        diff = int(labels[i]) ^ int(labels[(i + 1) % len(labels)])
        assert bin(diff).count("1") == 1


def test_square_qam_gray_neighbors_differ_one_bit():
    c = modem.constellation_from_name("16qam")
    pts = c.points
    labels = np.asarray(c.labels)
    spacing = np.min(np.abs(pts[1:] - pts[0]))
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if abs(pts[i] - pts[j]) <= spacing * 1.001:
                diff = int(labels[i]) ^ int(labels[j])
                assert bin(diff).count("1") == 1, (pts[i], pts[j])


def test_bpsk_points_are_real_pair():
    c = modem.constellation_from_name("bpsk")
    assert set(np.round(c.points, 9)) == {1.0 + 0j, -1.0 + 0j}


def test_qpsk_is_diagonal_psk_but_4qam_matches_it():
    qpsk = modem.constellation_from_name("qpsk")
    qam = modem.constellation_from_name("4qam")
    assert qpsk.scheme is Scheme.PSK
    assert qam.scheme is Scheme.QAM
    # same geometric points (diagonal unit-energy square)
    a = np.sort_complex(np.round(qpsk.points, 9))
    b = np.sort_complex(np.round(qam.points, 9))
    assert np.allclose(a, b)


def test_class_census_16qam():
    c = modem.constellation_from_name("16qam")
    kinds = [k.kind for k in c.classes]
    assert kinds.count(ClassKind.INNER) == 4
    assert kinds.count(ClassKind.CORNER) == 4
    edges = [k for k in kinds
             if k in (ClassKind.EDGE_REAL_FREE, ClassKind.EDGE_IMAG_FREE)]
    assert len(edges) == 8


def test_class_census_psk_all_outermost():
    for name in ("qpsk", "8psk", "16psk"):
        c = modem.constellation_from_name(name)
        assert all(k.kind is ClassKind.CIRCULAR
                   for k in c.classes)


def test_class_census_8qam():
    c = modem.constellation_from_name("8qam")
    kinds = [k.kind for k in c.classes]
    # outer columns are corners, inner columns have free imaginary part
    assert kinds.count(ClassKind.CORNER) == 4
    assert kinds.count(ClassKind.EDGE_IMAG_FREE) == 4


def test_apsk_rings():
    c = modem.constellation_from_name("16apsk")
    radii = np.abs(c.points)
    inner = np.isclose(radii, radii.min())
    assert inner.sum() == 4
    assert (~inner).sum() == 12
    ratio = radii.max() / radii.min()
    assert ratio == pytest.approx(2.6, rel=1e-9)


@pytest.mark.parametrize("name", ALL_NAMES)
def test_detection_roundtrip_at_amplitude(name):
    """Every point, scaled to the operating amplitude, detects to itself."""
    c = modem.constellation_from_name(name)
    amp = 2.7  # arbitrary sigma*sqrt(gamma)
    for idx, p in enumerate(c.points):
        assert c.detect(amp * p, scale=amp) == idx


@pytest.mark.parametrize("name", ALL_NAMES)
def test_detection_with_rotation_compensation(name):
    c = modem.constellation_from_name(name)
    amp = 1.9
    theta = 0.7331
    for idx, p in enumerate(c.points):
        received = amp * p * np.exp(1j * theta)
        assert c.detect(received, rotation=theta, scale=amp) == idx


def test_detection_deeper_in_unbounded_region_is_stable():
    """Outermost regions are unbounded: going deeper never flips."""
    c = modem.constellation_from_name("qpsk")
    for idx, p in enumerate(c.points):
        assert c.detect(10.0 * p, scale=1.0) == idx
    c16 = modem.constellation_from_name("16qam")
    corner = int(np.argmax(np.abs(c16.points)))
    p = c16.points[corner]
    assert c16.detect(5.0 * p, scale=1.0) == corner


def test_detect_small_perturbation_within_region():
    c = modem.constellation_from_name("16qam")
    amp = 3.0
    rng = np.random.default_rng(5)
    spacing = np.min(np.diff(np.unique(np.round(c.points.real, 9))))
    for idx, p in enumerate(c.points):
        for _ in range(10):
            dz = (rng.uniform(-0.4, 0.4) + 1j * rng.uniform(-0.4, 0.4))
            assert c.detect(amp * (p + dz * spacing), scale=amp) == idx


def test_unknown_name_raises():
    with pytest.raises(ValueError):
        modem.constellation_from_name("17qam")


def test_to_json_roundtrip_fields(qpsk):
    import json
    d = json.loads(qpsk.to_json())
    assert d["order"] == 4
    assert len(d["points"]) == 4
