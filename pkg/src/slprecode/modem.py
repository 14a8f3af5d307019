"""Constellations: construction, classification, bit maps, and detection.

Builds unit-average-energy PSK/QAM/APSK point sets, classifies each point
by its position in the constellation geometry (which determines the shape
of its detection region), provides Gray-coded bit maps, and implements
rotation-aware decision-region detection.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Scheme",
    "ClassKind",
    "SymbolClass",
    "Constellation",
    "build_constellation",
    "constellation_from_name",
]


class Scheme(enum.Enum):
    PSK = "psk"
    QAM = "qam"
    APSK = "apsk"


class ClassKind(enum.Enum):
    """Geometric role of a point, deciding its detection-region shape.

    INNER points sit strictly inside the grid on both axes: their region is
    a single point at the nominal position (two equality constraints).
    EDGE points sit at the grid extreme on exactly one axis: that axis is
    unbounded (directed inequality), the other is pinned (equality).
    CORNER points are extreme on both axes: two directed inequalities.
    CIRCULAR points are the outer ring of a circular constellation: two
    sign-directed inequalities plus a phase-line equality.
    """

    INNER = "inner"
    EDGE_REAL_FREE = "edge_real_free"
    EDGE_IMAG_FREE = "edge_imag_free"
    CORNER = "corner"
    CIRCULAR = "circular_outermost"


@dataclass(frozen=True)
class SymbolClass:
    kind: ClassKind
    # Sign of the unbounded direction(s): +1 / -1 per axis, 0 where the
    # axis is pinned by an equality (or absent, e.g. Im of a real point).
    re_sign: int = 0
    im_sign: int = 0


def _gray(k: int) -> int:
    return k ^ (k >> 1)


def _gray_inverse(g: int) -> int:
    k = 0
    while g:
        k ^= g
        g >>= 1
    return k


def _qam_axis_levels(n: int) -> np.ndarray:
    """Odd-integer amplitude levels -n+1, ..., -1, 1, ..., n-1."""
    return np.arange(-(n - 1), n, 2, dtype=float)


@dataclass(frozen=True)
class Constellation:
    scheme: Scheme
    order: int
    points: np.ndarray  # (order,) complex, unit average energy
    classes: tuple[SymbolClass, ...]
    labels: tuple[int, ...]  # Gray label of each point index
    # QAM geometry (None for circular schemes): scaled axis levels.
    re_levels: np.ndarray | None = None
    im_levels: np.ndarray | None = None
    # APSK geometry: ring radii and per-point ring index.
    ring_radii: tuple[float, ...] = ()
    ring_of: tuple[int, ...] = ()
    _label_to_index: dict = field(default_factory=dict, repr=False)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.order)))

    # ------------------------------------------------------------------
    # bit maps
    # ------------------------------------------------------------------
    def bits_to_symbol(self, bits) -> int:
        bits = list(bits)
        if len(bits) != self.bits_per_symbol:
            raise ValueError(
                f"expected {self.bits_per_symbol} bits, got {len(bits)}"
            )
        label = 0
        for b in bits:
            label = (label << 1) | (int(b) & 1)
        return self._label_to_index[label]

    def symbol_to_bits(self, index: int) -> list[int]:
        label = self.labels[index]
        m = self.bits_per_symbol
        return [(label >> (m - 1 - i)) & 1 for i in range(m)]

    # ------------------------------------------------------------------
    # detection
    # ------------------------------------------------------------------
    def detect(self, received: complex, rotation: float = 0.0,
               scale: float = 1.0) -> int:
        """Decision-region detection of a (de-rotated) received sample.

        The receiver first derotates r' = received * e^{-i*rotation}, then
        tests region membership: phase sectors for circular schemes,
        per-axis strip boundaries for grid schemes.  Grid boundaries live
        at ``scale`` times the midpoints between constellation levels, so
        callers operating at amplitude A = sigma_z * sqrt(gamma) pass that
        A; any amplitude deeper inside an unbounded region detects to the
        same point.
        """
        r = received * np.exp(-1j * rotation)
        if self.scheme is Scheme.PSK:
            return self._detect_phase(r, self.points)
        if self.scheme is Scheme.QAM:
            ire = self._axis_index(r.real, self.re_levels, scale)
            iim = self._axis_index(r.imag, self.im_levels, scale)
            return self._grid_index(ire, iim)
        # APSK: amplitude picks the ring, phase picks the point within it.
        radii = np.asarray(self.ring_radii) * scale
        cuts = 0.5 * (radii[1:] + radii[:-1])
        ring = int(np.searchsorted(cuts, abs(r)))
        members = [i for i, rg in enumerate(self.ring_of) if rg == ring]
        pts = self.points[members]
        return members[self._detect_phase(r, pts)]

    @staticmethod
    def _detect_phase(r: complex, pts: np.ndarray) -> int:
        ang = np.angle(r / pts) if r != 0 else np.angle(1.0 / pts)
        return int(np.argmin(np.abs(np.angle(np.exp(1j * ang)))))

    @staticmethod
    def _axis_index(coord: float, levels: np.ndarray, scale: float) -> int:
        cuts = scale * 0.5 * (levels[1:] + levels[:-1])
        return int(np.searchsorted(cuts, coord))

    def _grid_index(self, ire: int, iim: int) -> int:
        key = (round(self.re_levels[ire], 12), round(self.im_levels[iim], 12))
        return self._grid_lookup[key]

    @property
    def _grid_lookup(self) -> dict:
        if "_grid" not in self._label_to_index:
            lut = {}
            for i, p in enumerate(self.points):
                lut[(round(p.real, 12), round(p.imag, 12))] = i
            self._label_to_index["_grid"] = lut
        return self._label_to_index["_grid"]

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({
            "scheme": self.scheme.value,
            "order": self.order,
            "points": [[p.real, p.imag] for p in self.points],
            "classes": [
                {"kind": c.kind.value, "re_sign": c.re_sign,
                 "im_sign": c.im_sign}
                for c in self.classes
            ],
            "labels": list(self.labels),
        })


def _classify_grid(points: np.ndarray, re_levels: np.ndarray,
                   im_levels: np.ndarray) -> list[SymbolClass]:
    re_max = np.max(np.abs(re_levels))
    im_max = np.max(np.abs(im_levels))
    out = []
    for p in points:
        at_re = np.isclose(abs(p.real), re_max)
        at_im = np.isclose(abs(p.imag), im_max)
        rs = int(np.sign(p.real))
        ims = int(np.sign(p.imag))
        if at_re and at_im:
            out.append(SymbolClass(ClassKind.CORNER, rs, ims))
        elif at_re:
            out.append(SymbolClass(ClassKind.EDGE_REAL_FREE, rs, 0))
        elif at_im:
            out.append(SymbolClass(ClassKind.EDGE_IMAG_FREE, 0, ims))
        else:
            out.append(SymbolClass(ClassKind.INNER, 0, 0))
    return out


def _circular_class(p: complex) -> SymbolClass:
    rs = 0 if abs(p.real) < 1e-12 else int(np.sign(p.real))
    ims = 0 if abs(p.imag) < 1e-12 else int(np.sign(p.imag))
    return SymbolClass(ClassKind.CIRCULAR, rs, ims)


def build_constellation(scheme: Scheme, order: int) -> Constellation:
    """Construct a unit-average-energy constellation with Gray labels."""
    if order < 2 or order & (order - 1):
        raise ValueError(f"order must be a power of two, got {order}")

    if scheme is Scheme.PSK:
        return _build_psk(order)
    if scheme is Scheme.QAM:
        return _build_qam(order)
    if scheme is Scheme.APSK:
        return _build_apsk(order)
    raise ValueError(f"unsupported scheme {scheme}")


def _build_psk(order: int) -> Constellation:
    if order == 2:
        points = np.array([1.0 + 0j, -1.0 + 0j])
    else:
        k = np.arange(order)
        points = np.exp(1j * np.pi * (2 * k + 1) / order)
    classes = tuple(_circular_class(p) for p in points)
    labels = tuple(_gray(k) for k in range(order))
    return _finish(Scheme.PSK, order, points, classes, labels)


def _build_qam(order: int) -> Constellation:
    if order == 8:
        nre, nim = 4, 2
    else:
        side = int(round(math.sqrt(order)))
        if side * side != order:
            raise ValueError(f"QAM order {order} admits no rectangular grid")
        nre = nim = side
    re_raw = _qam_axis_levels(nre)
    im_raw = _qam_axis_levels(nim)
    energy = (np.mean(re_raw ** 2) + np.mean(im_raw ** 2))
    norm = math.sqrt(energy)
    mre = int(round(math.log2(nre)))
    mim = int(round(math.log2(nim)))
    points, labels = [], []
    for ix in range(nre):
        for iy in range(nim):
            points.append((re_raw[ix] + 1j * im_raw[iy]) / norm)
            labels.append((_gray(ix) << mim) | _gray(iy))
    points = np.array(points)
    re_levels = re_raw / norm
    im_levels = im_raw / norm
    classes = tuple(_classify_grid(points, re_levels, im_levels))
    return _finish(Scheme.QAM, order, points, classes, tuple(labels),
                   re_levels=re_levels, im_levels=im_levels)


def _build_apsk(order: int) -> Constellation:
    if order != 16:
        raise ValueError("only 16-APSK (4+12 rings) is supported")
    ratio = 2.6  # outer/inner ring radius ratio
    # unit average energy: (4 r1^2 + 12 (ratio r1)^2) / 16 = 1
    r1 = math.sqrt(16.0 / (4.0 + 12.0 * ratio ** 2))
    r2 = ratio * r1
    inner = r1 * np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
    outer = r2 * np.exp(1j * (np.pi / 12 + np.pi / 6 * np.arange(12)))
    points = np.concatenate([inner, outer])
    classes = tuple(
        [SymbolClass(ClassKind.INNER, 0, 0)] * 4
        + [_circular_class(p) for p in outer]
    )
    labels = tuple(_gray(k) for k in range(16))
    return _finish(Scheme.APSK, 16, points, classes, labels,
                   ring_radii=(r1, r2), ring_of=tuple([0] * 4 + [1] * 12))


def _finish(scheme, order, points, classes, labels, **kw) -> Constellation:
    avg = float(np.mean(np.abs(points) ** 2))
    points = points / math.sqrt(avg)  # exact unit average energy
    if "re_levels" in kw:
        kw["re_levels"] = kw["re_levels"] / math.sqrt(avg)
        kw["im_levels"] = kw["im_levels"] / math.sqrt(avg)
    if "ring_radii" in kw:
        kw["ring_radii"] = tuple(r / math.sqrt(avg) for r in kw["ring_radii"])
    c = Constellation(scheme, order, points, classes, labels, **kw)
    for i, lab in enumerate(labels):
        c._label_to_index[lab] = i
    return c


_NAME_TABLE = {
    "bpsk": (Scheme.PSK, 2),
    "qpsk": (Scheme.PSK, 4),
    "8psk": (Scheme.PSK, 8),
    "16psk": (Scheme.PSK, 16),
    "4qam": (Scheme.QAM, 4),
    "8qam": (Scheme.QAM, 8),
    "16qam": (Scheme.QAM, 16),
    "64qam": (Scheme.QAM, 64),
    "16apsk": (Scheme.APSK, 16),
}


def constellation_from_name(name: str) -> Constellation:
    key = name.strip().lower().replace("-", "").replace("_", "")
    if key not in _NAME_TABLE:
        raise ValueError(
            f"unknown modulation {name!r}; known: {sorted(_NAME_TABLE)}"
        )
    return build_constellation(*_NAME_TABLE[key])
