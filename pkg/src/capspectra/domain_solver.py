"""Desk-scale PDE fixtures on the 2-sphere: meshes, eigenpairs, torsion.

Domains are described by a signed level function (positive inside) on a
latitude-longitude grid.  The mesh keeps exact full-cell areas, clipped
boundary-cell areas from the marching-squares contour through the corner
level values, and the contour itself as geodesic chords.  The Laplace
operator is a finite-volume stencil with boundary faces shortened to the
interpolated zero crossing of the level function, which keeps the scheme
second order on smooth boundaries.

Solves run on the unit sphere; a radius r rescales results through the
exact metric identities lambda -> lambda / r^2, areas -> r^2 * area,
lengths -> r * length, torsion values -> r^2 * value.
"""
from __future__ import annotations

import base64
import json
import math
import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import cg, splu

from .chiti import VerificationReport, resolve_tolerances
from .rearrangement import MeasuredSamples
from .sphere_geometry import (
    Admissibility,
    ManifoldSpec,
    cap_boundary_area,
    radius_from_volume,
)
from .torsion import TorsionField, make_torsion_field

_MIN_RESOLUTION = (64, 128)
_ZETA_MIN = 0.01
_EIG_TOL = 1e-10
_CG_TOL = 1e-10


class DomainSpecError(ValueError):
    """Malformed or inadmissible domain description."""


_KIND_PARAMS = {
    "cap": {"theta0"},
    "offpole_cap": {"center", "theta0"},
    "rect": {"theta_min", "theta_max", "phi_min", "phi_max"},
    "union": {"members"},
    "grid": {"rows", "cols", "bits"},
}


def _require_keys(obj: dict, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise DomainSpecError(f"unknown keys in {where}: {sorted(extra)}")


def _finite(params: dict, name: str) -> float:
    value = params.get(name)
    if not isinstance(value, (int, float)) or isinstance(value, bool) \
            or not math.isfinite(value):
        raise DomainSpecError(f"parameter {name} must be a finite number")
    return float(value)


def _validate_params(kind: str, params: dict) -> dict:
    if kind not in _KIND_PARAMS:
        raise DomainSpecError(f"unknown domain kind: {kind!r}")
    if not isinstance(params, dict):
        raise DomainSpecError("params must be an object")
    _require_keys(params, _KIND_PARAMS[kind], f"params of kind {kind!r}")
    missing = _KIND_PARAMS[kind] - set(params)
    if missing:
        raise DomainSpecError(f"missing params for kind {kind!r}: {sorted(missing)}")
    out: dict = {}
    if kind in ("cap", "offpole_cap"):
        theta0 = _finite(params, "theta0")
        if not (0.0 < theta0 < math.pi):
            raise DomainSpecError("theta0 must lie in (0, pi)")
        out["theta0"] = theta0
    if kind == "offpole_cap":
        center = params["center"]
        if not (isinstance(center, (list, tuple)) and len(center) == 2):
            raise DomainSpecError("center must be [theta, phi]")
        tc, pc = (float(center[0]), float(center[1]))
        if not (0.0 <= tc <= math.pi and math.isfinite(pc)):
            raise DomainSpecError("center colatitude must lie in [0, pi]")
        out["center"] = (tc, pc % (2.0 * math.pi))
    if kind == "rect":
        tmin = _finite(params, "theta_min")
        tmax = _finite(params, "theta_max")
        pmin = _finite(params, "phi_min")
        pmax = _finite(params, "phi_max")
        if not (0.0 <= tmin < tmax <= math.pi):
            raise DomainSpecError("need 0 <= theta_min < theta_max <= pi")
        if not (0.0 <= pmin < pmax <= 2.0 * math.pi):
            raise DomainSpecError("need 0 <= phi_min < phi_max <= 2 pi")
        if tmin == 0.0 and tmax == math.pi and pmax - pmin == 2.0 * math.pi:
            raise DomainSpecError("domain must not cover the whole sphere")
        out.update(theta_min=tmin, theta_max=tmax, phi_min=pmin, phi_max=pmax)
    if kind == "union":
        members = params["members"]
        if not (isinstance(members, list) and members):
            raise DomainSpecError("union needs a nonempty member list")
        validated = []
        for k, member in enumerate(members):
            if not isinstance(member, dict):
                raise DomainSpecError("union members must be objects")
            _require_keys(member, {"kind", "params"}, f"union member {k}")
            mk = member.get("kind")
            if mk == "union":
                raise DomainSpecError("nested unions are not supported")
            validated.append({"kind": mk, "params": _validate_params(mk, member.get("params", {}))})
        out["members"] = validated
    if kind == "grid":
        rows, cols = params["rows"], params["cols"]
        if not (isinstance(rows, int) and isinstance(cols, int)
                and rows >= 2 and cols >= 4):
            raise DomainSpecError("grid needs integer rows >= 2 and cols >= 4")
        bits_b64 = params["bits"]
        if not isinstance(bits_b64, str):
            raise DomainSpecError("bits must be a base64 string")
        try:
            raw = base64.b64decode(bits_b64, validate=True)
        except Exception as exc:
            raise DomainSpecError(f"bits are not valid base64: {exc}") from exc
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
        if bits.size < rows * cols:
            raise DomainSpecError("bit array shorter than rows * cols")
        bits = bits[: rows * cols].reshape(rows, cols)
        if not bits.any():
            raise DomainSpecError("grid domain is empty")
        if bits.all():
            raise DomainSpecError("domain must not cover the whole sphere")
        out.update(rows=rows, cols=cols, bits=bits)
    return out


def _member_level(kind: str, params: dict):
    if kind == "cap":
        theta0 = params["theta0"]
        return lambda th, ph: theta0 - th
    if kind == "offpole_cap":
        tc, pc = params["center"]
        theta0 = params["theta0"]

        def level(th, ph):
            cosd = (np.cos(th) * math.cos(tc)
                    + np.sin(th) * math.sin(tc) * np.cos(ph - pc))
            return theta0 - np.arccos(np.clip(cosd, -1.0, 1.0))

        return level
    if kind == "rect":
        tmin, tmax = params["theta_min"], params["theta_max"]
        pmin, pmax = params["phi_min"], params["phi_max"]
        width = pmax - pmin
        full_band = width >= 2.0 * math.pi - 1e-15

        def level(th, ph):
            m = np.minimum(th - tmin, tmax - th)
            if not full_band:
                w = np.mod(ph - pmin, 2.0 * math.pi)
                # signed azimuthal margin converted to arc length
                inside = np.minimum(w, width - w)
                outside = -np.minimum(w - width, 2.0 * math.pi - w)
                m_phi = np.where(w <= width, inside, outside) * np.sin(th)
                m = np.minimum(m, m_phi)
            return m + np.zeros_like(ph)

        return level
    if kind == "grid":
        rows, cols, bits = params["rows"], params["cols"], params["bits"]
        vals = 2.0 * bits.astype(float) - 1.0
        dth = math.pi / (rows - 1)
        dph = 2.0 * math.pi / cols

        def level(th, ph):
            th = np.asarray(th, dtype=float)
            ph = np.mod(np.asarray(ph, dtype=float), 2.0 * math.pi)
            u = np.clip(th / dth, 0.0, rows - 1 - 1e-12)
            i0 = u.astype(int)
            t = u - i0
            v = ph / dph
            j0 = np.clip(v.astype(int), 0, cols - 1)
            s = v - j0
            j1 = (j0 + 1) % cols
            f = ((1 - t) * (1 - s) * vals[i0, j0] + (1 - t) * s * vals[i0, j1]
                 + t * (1 - s) * vals[i0 + 1, j0] + t * s * vals[i0 + 1, j1])
            return f

        return level
    raise DomainSpecError(f"unknown domain kind: {kind!r}")


@dataclass(frozen=True)
class DomainSpec:
    """Validated domain description on a 2-sphere manifold model."""

    kind: str
    params: dict
    manifold: ManifoldSpec

    def __post_init__(self) -> None:
        if self.manifold.n != 2:
            raise DomainSpecError("PDE fixtures are restricted to n = 2")
        object.__setattr__(self, "params", _validate_params(self.kind, self.params))

    def level(self):
        """Vectorized signed level function, positive inside the domain."""
        if self.kind == "union":
            members = [_member_level(m["kind"], m["params"])
                       for m in self.params["members"]]

            def level(th, ph):
                out = members[0](th, ph)
                for m in members[1:]:
                    out = np.maximum(out, m(th, ph))
                return out

            return level
        return _member_level(self.kind, self.params)

    def to_dict(self) -> dict:
        params = dict(self.params)
        if self.kind == "grid":
            packed = np.packbits(self.params["bits"].astype(np.uint8).ravel())
            params["bits"] = base64.b64encode(packed.tobytes()).decode("ascii")
        if self.kind == "union":
            params["members"] = [
                {"kind": m["kind"], "params": dict(m["params"])}
                for m in self.params["members"]
            ]
        return {"kind": self.kind, "params": params,
                "manifold": self.manifold.to_dict()}


def domain_from_json(doc: str | dict) -> DomainSpec:
    """Parse {"kind": ..., "params": ..., "manifold": ...}; rejects unknown keys."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise DomainSpecError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DomainSpecError("domain document must be a JSON object")
    _require_keys(doc, {"kind", "params", "manifold"}, "domain document")
    for key in ("kind", "params", "manifold"):
        if key not in doc:
            raise DomainSpecError(f"domain document lacks {key!r}")
    mf = doc["manifold"]
    if not isinstance(mf, dict):
        raise DomainSpecError("manifold must be an object")
    _require_keys(mf, {"n", "r", "beta", "admissibility"}, "manifold")
    n = mf.get("n")
    if not isinstance(n, int):
        raise DomainSpecError("manifold n must be an integer")
    admissibility = mf.get("admissibility", "scaled_sphere")
    try:
        if admissibility == "assumed_admissible":
            if "r" in mf:
                raise DomainSpecError("assumed manifolds take beta, not r")
            manifold = ManifoldSpec.assumed_admissible(n, float(mf.get("beta", 1.0)))
        elif admissibility == "scaled_sphere":
            if "beta" in mf:
                raise DomainSpecError("scaled spheres derive beta from r")
            manifold = ManifoldSpec.scaled_sphere(n, float(mf.get("r", 1.0)))
        else:
            raise DomainSpecError(f"unknown admissibility: {admissibility!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DomainSpecError):
            raise
        raise DomainSpecError(str(exc)) from exc
    return DomainSpec(kind=doc["kind"], params=doc["params"], manifold=manifold)


# ---------------------------------------------------------------------------
# Mesh construction
# ---------------------------------------------------------------------------


def _geodesic_length(ta, pa, tb, pb) -> float:
    h = (math.sin(0.5 * (tb - ta)) ** 2
         + math.sin(ta) * math.sin(tb) * math.sin(0.5 * (pb - pa)) ** 2)
    return 2.0 * math.asin(min(1.0, math.sqrt(h)))


def _green_area(poly) -> float:
    # area enclosed by a ccw polygon in the (phi, theta) plane under the
    # sin(theta) dtheta dphi element: contour integral of cos(theta) dphi
    total = 0.0
    m = len(poly)
    for k in range(m):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % m]
        if y2 != y1:
            total += (x2 - x1) * (math.sin(y2) - math.sin(y1)) / (y2 - y1)
        else:
            total += (x2 - x1) * math.cos(y1)
    return total


def _cross_point(pa, va, pb, vb):
    t = va / (va - vb)
    return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))


def _clip_cell(th0, th1, ph0, ph1, f00, f01, f11, f10, fcen):
    """Clipped inside-area and boundary chords of one mixed-sign cell.

    Corners are walked counterclockwise in the (phi, theta) plane; the
    saddle configuration is disambiguated by the center sign.
    """
    pts = ((ph0, th0), (ph1, th0), (ph1, th1), (ph0, th1))
    vals = (f00, f01, f11, f10)
    inside = tuple(v > 0.0 for v in vals)
    saddle = inside == (True, False, True, False) or inside == (False, True, False, True)
    if saddle and fcen <= 0.0:
        crossings = [_cross_point(pts[k], vals[k], pts[(k + 1) % 4], vals[(k + 1) % 4])
                     for k in range(4)]
        if inside[0]:
            tris = [(pts[0], crossings[0], crossings[3]),
                    (pts[2], crossings[2], crossings[1])]
            chords = [(crossings[0], crossings[3]), (crossings[2], crossings[1])]
        else:
            tris = [(pts[1], crossings[1], crossings[0]),
                    (pts[3], crossings[3], crossings[2])]
            chords = [(crossings[1], crossings[0]), (crossings[3], crossings[2])]
        area = sum(_green_area(t) for t in tris)
        return area, chords
    poly = []
    crossings = []
    for k in range(4):
        a, b = k, (k + 1) % 4
        if inside[a]:
            poly.append(pts[a])
        if inside[a] != inside[b]:
            c = _cross_point(pts[a], vals[a], pts[b], vals[b])
            poly.append(c)
            crossings.append(c)
    if not poly:
        return 0.0, []
    area = _green_area(poly)
    if saddle:
        chords = [(crossings[0], crossings[1]), (crossings[2], crossings[3])]
    elif len(crossings) == 2:
        chords = [(crossings[0], crossings[1])]
    else:
        chords = []
    return area, chords


@dataclass
class DomainMesh:
    """Rasterized domain with exact cell measures and boundary contour.

    ``unit_measures`` are unit-sphere cell areas (0 for uncovered cells,
    partial for boundary cells); the ``measures`` property applies the
    r^2 metric factor.  ``stiffness`` and ``unit_mass`` discretize the
    Dirichlet Laplacian on the unit sphere over the ``dof_index`` cells;
    a fully interior polar cell row is merged into a single unknown.
    """

    spec: DomainSpec
    n_lat: int
    n_lon: int
    interior_mask: np.ndarray
    unit_measures: np.ndarray
    level_centers: np.ndarray
    level_corners: np.ndarray
    chords: np.ndarray
    unit_contour_length: float
    unit_staircase_length: float
    dof_index: np.ndarray
    dof_count: int
    north_merged: bool
    south_merged: bool
    stiffness: sp.csr_matrix
    unit_mass: np.ndarray
    connected: bool
    dof_rep: tuple = dataclass_field(repr=False, default=())

    @property
    def r(self) -> float:
        return self.spec.manifold.r

    @property
    def measures(self) -> np.ndarray:
        return self.r ** 2 * self.unit_measures

    @property
    def volume(self) -> float:
        return float(np.sum(self.measures))

    @property
    def boundary_length(self) -> float:
        return self.r * self.unit_contour_length

    @property
    def staircase_length(self) -> float:
        return self.r * self.unit_staircase_length

    @property
    def theta_centers(self) -> np.ndarray:
        dth = math.pi / self.n_lat
        return (np.arange(self.n_lat) + 0.5) * dth

    @property
    def phi_centers(self) -> np.ndarray:
        dph = 2.0 * math.pi / self.n_lon
        return (np.arange(self.n_lon) + 0.5) * dph


@dataclass(frozen=True)
class ScalarField:
    """Cell-sampled scalar, zero outside the degrees of freedom."""

    mesh: DomainMesh
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.mesh.n_lat, self.mesh.n_lon):
            raise ValueError("field shape does not match the mesh")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        if np.any(self.values[self.mesh.dof_index < 0] != 0.0):
            raise ValueError("field must vanish outside the domain cells")


def build_mesh(domain: DomainSpec, resolution: tuple[int, int] = (256, 512)) -> DomainMesh:
    """Rasterize the domain on an n_lat x n_lon grid and assemble operators."""
    n_lat, n_lon = int(resolution[0]), int(resolution[1])
    if n_lat < _MIN_RESOLUTION[0] or n_lon < _MIN_RESOLUTION[1]:
        raise ValueError(f"resolution must be at least {_MIN_RESOLUTION}")
    dth = math.pi / n_lat
    dph = 2.0 * math.pi / n_lon
    level = domain.level()

    theta_v = np.arange(n_lat + 1) * dth
    phi_v = np.arange(n_lon) * dph
    # level functions of phi-independent domains broadcast to a column;
    # expand to the full grid before any axis-1 arithmetic
    fc = np.broadcast_to(
        np.asarray(level(theta_v[:, None], phi_v[None, :]), dtype=float),
        (n_lat + 1, n_lon))
    th_c = (np.arange(n_lat) + 0.5) * dth
    ph_c = (np.arange(n_lon) + 0.5) * dph
    fcen = np.broadcast_to(
        np.asarray(level(th_c[:, None], ph_c[None, :]), dtype=float),
        (n_lat, n_lon))
    # zero level values sit exactly on the boundary; nudge them outside so
    # every corner has a definite sign
    eps = 1e-12 * max(1.0, float(np.max(np.abs(fc))))
    fc = np.where(fc == 0.0, -eps, fc)
    fcen = np.where(fcen == 0.0, -eps, fcen)

    cin = fc > 0.0
    c00 = cin[:-1, :]
    c10 = cin[1:, :]
    c01 = np.roll(c00, -1, axis=1)
    c11 = np.roll(c10, -1, axis=1)
    any_in = c00 | c01 | c10 | c11
    all_in = c00 & c01 & c10 & c11
    cut = any_in & ~all_in

    band = dph * (np.cos(theta_v[:-1]) - np.cos(theta_v[1:]))
    measures = np.where(all_in, band[:, None], 0.0)

    fc_right = np.roll(fc, -1, axis=1)
    chord_rows: list[list[float]] = []
    contour = 0.0
    for i, j in np.argwhere(cut):
        th0, th1 = theta_v[i], theta_v[i + 1]
        ph0, ph1 = phi_v[j], phi_v[j] + dph
        area, chords = _clip_cell(
            th0, th1, ph0, ph1,
            fc[i, j], fc_right[i, j], fc_right[i + 1, j], fc[i + 1, j],
            fcen[i, j])
        measures[i, j] = max(area, 0.0)
        for (pa, ta), (pb, tb) in chords:
            length = _geodesic_length(ta, pa, tb, pb)
            contour += length
            chord_rows.append([ta, pa, tb, pb])

    interior = (fcen > 0.0) & (measures > 0.0)
    if not interior.any():
        raise DomainSpecError("empty domain after rasterization")
    if all_in.all():
        raise DomainSpecError("domain must not cover the whole sphere")

    # staircase length between center-inside and center-outside cells
    face_th = np.sin(theta_v[1:-1]) * dph
    diff_th = interior[:-1, :] != interior[1:, :]
    staircase = float(np.sum(diff_th * face_th[:, None]))
    diff_ph = interior != np.roll(interior, -1, axis=1)
    staircase += float(np.count_nonzero(diff_ph)) * dth

    north_merged = bool(all_in[0, :].all() and interior[1, :].all())
    south_merged = bool(all_in[-1, :].all() and interior[-2, :].all())

    dof_index = -np.ones((n_lat, n_lon), dtype=int)
    next_id = 0
    if north_merged:
        dof_index[0, :] = next_id
        next_id += 1
    rows = range(1 if north_merged else 0, n_lat - 1 if south_merged else n_lat)
    for i in rows:
        cols = np.flatnonzero(interior[i])
        dof_index[i, cols] = next_id + np.arange(cols.size)
        next_id += cols.size
    if south_merged:
        dof_index[-1, :] = next_id
        next_id += 1
    dof_count = next_id

    stiffness, unit_mass, dof_rep = _assemble(
        dof_index, dof_count, measures, fcen, n_lat, n_lon,
        north_merged, south_merged)

    n_comp = connected_components(stiffness, directed=False)[0] if dof_count else 1
    connected = bool(n_comp == 1)
    if not connected:
        warnings.warn("rasterized domain is disconnected; solves describe "
                      "the component selected by the iteration", RuntimeWarning)

    return DomainMesh(
        spec=domain, n_lat=n_lat, n_lon=n_lon, interior_mask=interior,
        unit_measures=measures, level_centers=fcen, level_corners=fc,
        chords=np.asarray(chord_rows, dtype=float).reshape(-1, 4),
        unit_contour_length=contour, unit_staircase_length=staircase,
        dof_index=dof_index, dof_count=dof_count,
        north_merged=north_merged, south_merged=south_merged,
        stiffness=stiffness, unit_mass=unit_mass, connected=connected,
        dof_rep=dof_rep)


def _assemble(dof_index, dof_count, measures, fcen, n_lat, n_lon,
              north_merged, south_merged):
    dth = math.pi / n_lat
    dph = 2.0 * math.pi / n_lon
    theta_face = np.arange(1, n_lat) * dth
    th_c = (np.arange(n_lat) + 0.5) * dth

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    diag = np.zeros(dof_count)

    def add_faces(ida, idb, fa, fb, cond):
        both = (ida >= 0) & (idb >= 0) & (ida != idb)
        if both.any():
            r, c, w = ida[both], idb[both], cond[both]
            rows.extend((r, c))
            cols.extend((c, r))
            vals.extend((-w, -w))
            np.add.at(diag, r, w)
            np.add.at(diag, c, w)
        for inn, out in ((ida, idb), (idb, ida)):
            dirich = (inn >= 0) & (out < 0)
            if dirich.any():
                f_in = fa if inn is ida else fb
                f_out = fb if inn is ida else fa
                den = f_in[dirich] - f_out[dirich]
                with np.errstate(divide="ignore", invalid="ignore"):
                    zeta = f_in[dirich] / den
                zeta = np.where(np.isfinite(zeta) & (den > 0.0), zeta, 1.0)
                zeta = np.clip(zeta, _ZETA_MIN, 1.0)
                np.add.at(diag, inn[dirich], cond[dirich] / zeta)

    # colatitude faces between rows i and i+1
    i_lo = 1 if north_merged else 0
    i_hi = n_lat - 2 if south_merged else n_lat - 1
    sl = slice(i_lo, i_hi)
    ida = dof_index[sl, :].ravel()
    idb = dof_index[1:, :][sl, :].ravel()
    fa = fcen[sl, :].ravel()
    fb = fcen[1:, :][sl, :].ravel()
    cond = np.broadcast_to((np.sin(theta_face[sl]) * dph / dth)[:, None],
                           (i_hi - i_lo, n_lon)).ravel()
    add_faces(ida, idb, fa, fb, cond)

    # merged polar caps couple to the adjacent ring across d = 1.5 dth
    if north_merged:
        c = math.sin(theta_face[0]) * dph / (1.5 * dth)
        ring = dof_index[1, :]
        rows.extend((np.zeros(n_lon, dtype=int) + dof_index[0, 0], ring))
        cols.extend((ring, np.zeros(n_lon, dtype=int) + dof_index[0, 0]))
        vals.extend((np.full(n_lon, -c), np.full(n_lon, -c)))
        diag[dof_index[0, 0]] += n_lon * c
        np.add.at(diag, ring, c)
    if south_merged:
        c = math.sin(theta_face[-1]) * dph / (1.5 * dth)
        ring = dof_index[-2, :]
        pole = dof_index[-1, 0]
        rows.extend((np.full(n_lon, pole), ring))
        cols.extend((ring, np.full(n_lon, pole)))
        vals.extend((np.full(n_lon, -c), np.full(n_lon, -c)))
        diag[pole] += n_lon * c
        np.add.at(diag, ring, c)

    # longitude faces between columns j and j+1 (periodic)
    row_sel = np.ones(n_lat, dtype=bool)
    if north_merged:
        row_sel[0] = False
    if south_merged:
        row_sel[-1] = False
    ida = dof_index[row_sel, :].ravel()
    idb = np.roll(dof_index, -1, axis=1)[row_sel, :].ravel()
    fa = fcen[row_sel, :].ravel()
    fb = np.roll(fcen, -1, axis=1)[row_sel, :].ravel()
    cond = np.broadcast_to((dth / (np.sin(th_c[row_sel]) * dph))[:, None],
                           (int(row_sel.sum()), n_lon)).ravel()
    add_faces(ida, idb, fa, fb, cond)

    idx = np.arange(dof_count)
    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dof_count, dof_count)).tocsr()

    mass = np.zeros(dof_count)
    sel = dof_index >= 0
    np.add.at(mass, dof_index[sel], measures[sel])

    # one representative cell per unknown, used to read fields back out
    rep_i = np.full(dof_count, -1, dtype=int)
    rep_j = np.full(dof_count, -1, dtype=int)
    ii, jj = np.nonzero(sel)
    rep_i[dof_index[ii, jj]] = ii
    rep_j[dof_index[ii, jj]] = jj
    return matrix, mass, (rep_i, rep_j)


# ---------------------------------------------------------------------------
# Solves
# ---------------------------------------------------------------------------


def _field_from_dofs(mesh: DomainMesh, x: np.ndarray) -> ScalarField:
    grid = np.zeros((mesh.n_lat, mesh.n_lon))
    sel = mesh.dof_index >= 0
    grid[sel] = x[mesh.dof_index[sel]]
    return ScalarField(mesh=mesh, values=grid)


def _dof_values(mesh: DomainMesh, field: ScalarField) -> np.ndarray:
    rep_i, rep_j = mesh.dof_rep
    return field.values[rep_i, rep_j]


def solve_dirichlet_eigenpair(mesh: DomainMesh, max_iter: int = 500):
    """Smallest Dirichlet eigenvalue and positive eigenfunction (sup = 1).

    Inverse power iteration on the unit-sphere operator, converged when
    the Rayleigh quotient is stable to 1e-10 relative; the returned
    eigenvalue carries the 1/r^2 metric factor.
    """
    if mesh.dof_count < 1:
        raise ValueError("mesh has no interior cells")
    lu = splu(mesh.stiffness.tocsc())
    mass = mesh.unit_mass
    x = np.ones(mesh.dof_count)
    lam = math.inf
    for _ in range(max_iter):
        y = mass * x
        x = lu.solve(y)
        num = float(x @ y)
        den = float(x @ (mass * x))
        lam_new = num / den
        if abs(lam_new - lam) <= _EIG_TOL * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
        x = x / np.max(np.abs(x))
    else:
        raise RuntimeError("inverse power iteration did not converge")
    peak = x[int(np.argmax(np.abs(x)))]
    x = x / peak
    x = np.maximum(x, 0.0)
    return lam / mesh.r ** 2, _field_from_dofs(mesh, x)


def solve_torsion(mesh: DomainMesh, max_iter: int | None = None) -> TorsionField:
    """Torsion function (Poisson problem with unit source) and rigidity.

    Jacobi-preconditioned conjugate gradient to relative residual 1e-10
    on the unit sphere; values scale by r^2, so the rigidity summed
    against r^2-scaled measures scales by r^4.
    """
    if mesh.dof_count < 1:
        raise ValueError("mesh has no interior cells")
    matrix = mesh.stiffness
    b = mesh.unit_mass
    precond = sp.diags(1.0 / matrix.diagonal())
    maxiter = max_iter or max(2000, 20 * mesh.n_lat)
    try:
        w, info = cg(matrix, b, rtol=_CG_TOL, atol=0.0, M=precond, maxiter=maxiter)
    except TypeError:
        w, info = cg(matrix, b, tol=_CG_TOL, atol=0.0, M=precond, maxiter=maxiter)
    if info != 0:
        raise RuntimeError(f"conjugate gradient did not converge (info={info})")
    w = np.maximum(w, 0.0) * mesh.r ** 2
    field = _field_from_dofs(mesh, w)
    samples = measured_samples(mesh, field)
    return make_torsion_field(samples, mesh.spec.manifold, field=field)


def measured_samples(mesh: DomainMesh, field: ScalarField | None = None) -> MeasuredSamples:
    """Covered cells as (value, measure) pairs on the scaled sphere.

    Boundary cells whose center lies outside still contribute measure
    (with value zero), so the totals match the domain volume.
    """
    covered = mesh.unit_measures > 0.0
    values = np.zeros(int(np.count_nonzero(covered)))
    if field is not None:
        if field.mesh is not mesh:
            raise ValueError("field belongs to a different mesh")
        values = np.maximum(field.values[covered], 0.0)
    return MeasuredSamples(values=values, measures=mesh.measures[covered])


def dirichlet_energy(mesh: DomainMesh, field: ScalarField) -> float:
    """Discrete int |grad f|^2 over the domain (scale-invariant in n = 2)."""
    x = _dof_values(mesh, field)
    return float(x @ (mesh.stiffness @ x))


def isoperimetric_check(mesh: DomainMesh,
                        tolerances: dict[str, float] | None = None) -> VerificationReport:
    """Boundary length against the cap of equal volume.

    lhs is the marching-squares contour length, rhs the weighted model
    bound beta * L(theta(vol)); the check passes while
    lhs >= rhs * (1 - iso).  The staircase estimate is reported in the
    metadata only, since it overestimates lengths by up to sqrt(2).
    """
    spec = mesh.spec.manifold
    if spec.admissibility is not Admissibility.SCALED_SPHERE:
        raise ValueError("isoperimetric check needs a scaled-sphere manifold")
    tols = resolve_tolerances(tolerances)
    vol = mesh.volume
    theta = radius_from_volume(spec, vol)
    rhs = spec.beta * float(cap_boundary_area(spec, theta))
    lhs = mesh.boundary_length
    margin = lhs - rhs
    tolerance = tols["iso"] * rhs
    equality = bool(abs(margin) < tols["equality_flag"] * rhs)
    return VerificationReport(
        name="isoperimetric", lhs=lhs, rhs=rhs, margin=margin,
        tolerance=tolerance, passed=bool(margin >= -tolerance),
        metadata={"theta_star": theta, "volume": vol,
                  "staircase_length": mesh.staircase_length,
                  "ratio": lhs / rhs, "equality": equality})
