"""Parametric surface patches with closed-form projection and ray queries.

Every patch lives in an axis-aligned frame: ``origin`` plus a 3x3 matrix whose
columns are the local axes, each a signed coordinate axis. All queries are
vectorised over point arrays of shape ``(N, 3)``.
"""

from __future__ import annotations

import math

import numpy as np

HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi
HOLE_RADIUS = 2.0
DOMAIN_TOL = 1e-9

AXES = {
    "+x": (1, 0, 0), "-x": (-1, 0, 0),
    "+y": (0, 1, 0), "-y": (0, -1, 0),
    "+z": (0, 0, 1), "-z": (0, 0, -1),
}


class OffsetOutOfRange(ValueError):
    pass


def check_offset(delta):
    if not abs(delta) < 0.5:
        raise OffsetOutOfRange(f"|delta| must be < 1/2, got {delta}")


def axis_name(v):
    v = tuple(int(round(c)) for c in v)
    for k, a in AXES.items():
        if a == v:
            return k
    raise ValueError(f"{v} is not a signed coordinate axis")


def make_frame(e1, e2, e3):
    R = np.array([AXES[e] if isinstance(e, str) else e for e in (e1, e2, e3)], dtype=float).T
    if not np.allclose(np.abs(R).sum(axis=0), 1) or not np.allclose(np.abs(R).sum(axis=1), 1):
        raise ValueError("frame axes must be distinct signed coordinate axes")
    return R


class Patch:
    kind = "patch"
    curves: tuple = ()

    def __init__(self, origin, R, orient=1):
        self.origin = np.asarray(origin, dtype=float)
        self.R = np.asarray(R, dtype=float)
        self.orient = int(orient)

    # local <-> world
    def to_local(self, q):
        return (np.atleast_2d(q) - self.origin) @ self.R

    def to_world(self, loc):
        return self.origin + np.atleast_2d(loc) @ self.R.T

    def world_dir(self, loc_dir):
        return np.atleast_2d(loc_dir) @ self.R.T

    def flip(self):
        self.orient = -self.orient

    def local_extent(self):
        raise NotImplementedError

    def bbox(self):
        lo, hi = self.local_extent()
        corners = np.array([[lo[0] if a == 0 else hi[0], lo[1] if b == 0 else hi[1], lo[2] if c == 0 else hi[2]]
                            for a in (0, 1) for b in (0, 1) for c in (0, 1)])
        w = self.to_world(corners)
        return w.min(axis=0), w.max(axis=0)

    def local_window(self, window):
        """Axis-aligned world box mapped to a local box (frames are signed permutations)."""
        lo, hi = (np.asarray(x, float) for x in window)
        corners = self.to_local(np.array([lo, hi]))
        return corners.min(axis=0), corners.max(axis=0)

    def frame_dict(self):
        return {
            "origin": [float(x) for x in self.origin],
            "axes": [axis_name(self.R[:, k]) for k in range(3)],
            "orient": self.orient,
        }

    def ray_count(self, o, d):
        """Number of forward crossings of each ray with the patch."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(origin={self.origin.tolist()}, axes={self.frame_dict()['axes']})"


def _empty_projection(n):
    return {
        "valid": np.zeros(n, bool),
        "foot": np.zeros((n, 3)),
        "normal": np.zeros((n, 3)),
        "delta": np.full(n, np.inf),
        "local": np.zeros((n, 2)),
    }


class Square(Patch):
    """Axis-parallel square ``[0, side]^2`` in the local (u, v) plane with radius-2 holes."""

    kind = "Square"

    def __init__(self, origin, R, side, holes=(), orient=1):
        super().__init__(origin, R, orient)
        self.side = float(side)
        self.holes = [tuple(float(c) for c in h) for h in holes]
        if self.side < 1:
            raise ValueError("square side must be at least 1")
        for i, (hu, hv) in enumerate(self.holes):
            margin = min(hu, hv, self.side - hu, self.side - hv) - HOLE_RADIUS
            if margin < 2 - 1e-9:
                raise ValueError(f"hole {i} is only {margin} from the square boundary")
            for hu2, hv2 in self.holes[:i]:
                if math.hypot(hu - hu2, hv - hv2) < 6 - 1e-9:
                    raise ValueError("hole centres must be at least 6 apart")

    @property
    def curves(self):
        return ("u0", "ua", "v0", "va") + tuple(f"hole{k}" for k in range(len(self.holes)))

    @property
    def normal_dir(self):
        return self.orient * self.R[:, 2]

    def area(self):
        return self.side**2 - len(self.holes) * math.pi * HOLE_RADIUS**2

    def local_extent(self):
        return (0.0, 0.0, 0.0), (self.side, self.side, 0.0)

    def hole_world(self, k):
        hu, hv = self.holes[k]
        return self.to_world([hu, hv, 0.0])[0]

    def in_hole(self, u, v, radius=HOLE_RADIUS):
        mask = np.zeros(np.shape(u), bool)
        for hu, hv in self.holes:
            mask |= np.hypot(u - hu, v - hv) < radius
        return mask

    def eval(self, loc):
        loc = np.atleast_2d(loc)
        pos = self.to_world(np.column_stack([loc[:, 0], loc[:, 1], np.zeros(len(loc))]))
        return pos, np.broadcast_to(self.normal_dir, pos.shape).copy()

    def project(self, q):
        l = self.to_local(q)
        u, v, w = l[:, 0], l[:, 1], l[:, 2]
        t = DOMAIN_TOL
        valid = (u >= -t) & (u <= self.side + t) & (v >= -t) & (v <= self.side + t)
        valid &= ~self.in_hole(u, v, HOLE_RADIUS - t)
        foot = self.to_world(np.column_stack([u, v, np.zeros_like(u)]))
        return {
            "valid": valid,
            "foot": foot,
            "normal": np.broadcast_to(self.normal_dir, foot.shape).copy(),
            "delta": self.orient * w,
            "local": np.column_stack([u, v]),
        }

    def ray_count(self, o, d):
        lo, ld = self.to_local(o), self.to_local(o + d) - self.to_local(o)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -lo[:, 2] / ld[:, 2]
        u = lo[:, 0] + t * ld[:, 0]
        v = lo[:, 1] + t * ld[:, 1]
        hit = (t > 0) & np.isfinite(t) & (u >= 0) & (u <= self.side) & (v >= 0) & (v <= self.side)
        hit &= ~self.in_hole(u, v)
        return hit.astype(int)

    def curve_eval(self, cid, m):
        s = np.linspace(0, self.side, m)
        if cid.startswith("hole"):
            hu, hv = self.holes[int(cid[4:])]
            a = np.linspace(0, TWO_PI, m, endpoint=False)
            loc = np.column_stack([hu + HOLE_RADIUS * np.cos(a), hv + HOLE_RADIUS * np.sin(a)])
        else:
            fixed = 0.0 if cid.endswith("0") else self.side
            loc = np.column_stack([np.full(m, fixed), s]) if cid[0] == "u" else np.column_stack([s, np.full(m, fixed)])
        return self.eval(loc)

    def sample(self, spacing):
        k = max(1, math.ceil(self.side / spacing))
        g = np.linspace(0, self.side, k + 1)
        U, V = np.meshgrid(g, g, indexing="ij")
        U, V = U.ravel(), V.ravel()
        keep = ~self.in_hole(U, V)
        loc = [np.column_stack([U[keep], V[keep]])]
        for hu, hv in self.holes:
            m = max(8, math.ceil(TWO_PI * HOLE_RADIUS / spacing))
            a = np.linspace(0, TWO_PI, m, endpoint=False)
            loc.append(np.column_stack([hu + HOLE_RADIUS * np.cos(a), hv + HOLE_RADIUS * np.sin(a)]))
        loc = np.vstack(loc)
        pos, nrm = self.eval(loc)
        return loc, pos, nrm

    def offset_params(self, delta):
        check_offset(delta)
        return {"kind": "Square", "side": self.side, "hole_radius": HOLE_RADIUS,
                "plane_shift": delta, "holes": list(self.holes)}

    def to_dict(self):
        return {"kind": self.kind, **self.frame_dict(), "side": self.side,
                "holes": [list(h) for h in self.holes]}


class Cylinder(Patch):
    """Radius-1 cylinder around local w, ``w in [0, length]``, angles ``[theta0, theta0+span]``.

    ``span`` is pi/2 (quarter cylinder) or 2 pi (full cylinder).
    """

    def __init__(self, origin, R, length, span=TWO_PI, theta0=0.0, orient=1, radius=1.0):
        super().__init__(origin, R, orient)
        self.length = float(length)
        self.span = float(span)
        self.theta0 = float(theta0)
        self.radius = float(radius)
        if self.length < 1:
            raise ValueError("cylinder axis length must be at least 1")
        if not (math.isclose(self.span, HALF_PI) or math.isclose(self.span, TWO_PI)):
            raise ValueError("cylinder span must be pi/2 or 2 pi")

    @property
    def full(self):
        return math.isclose(self.span, TWO_PI)

    @property
    def kind(self):
        return "Cylinder" if self.full else "QuarterCylinder"

    @property
    def curves(self):
        return ("end0", "end1") if self.full else ("end0", "end1", "side0", "side1")

    def area(self):
        return self.span * self.radius * self.length

    def local_extent(self):
        r = self.radius
        return (-r, -r, 0.0), (r, r, self.length)

    def _angle_in_range(self, theta, tol=0.0):
        if self.full:
            return np.ones(np.shape(theta), bool)
        rel = np.mod(theta - self.theta0 + tol, TWO_PI)
        return rel <= self.span + 2 * tol

    def eval(self, loc):
        loc = np.atleast_2d(loc)
        th, w = loc[:, 0], loc[:, 1]
        radial = np.column_stack([np.cos(th), np.sin(th), np.zeros_like(th)])
        pos = self.to_world(self.radius * radial + np.column_stack([np.zeros((len(th), 2)), w]))
        return pos, self.orient * self.world_dir(radial)

    def project(self, q):
        l = self.to_local(q)
        rho = np.hypot(l[:, 0], l[:, 1])
        th = np.arctan2(l[:, 1], l[:, 0])
        t = DOMAIN_TOL
        valid = (l[:, 2] >= -t) & (l[:, 2] <= self.length + t) & (rho > 0)
        valid &= self._angle_in_range(th, t / max(self.radius, 1e-12))
        pos, nrm = self.eval(np.column_stack([th, l[:, 2]]))
        return {"valid": valid, "foot": pos, "normal": nrm,
                "delta": self.orient * (rho - self.radius), "local": np.column_stack([th, l[:, 2]])}

    def ray_count(self, o, d):
        lo = self.to_local(o)
        ld = self.to_local(o + d) - lo
        a = ld[:, 0] ** 2 + ld[:, 1] ** 2
        b = 2 * (lo[:, 0] * ld[:, 0] + lo[:, 1] * ld[:, 1])
        c = lo[:, 0] ** 2 + lo[:, 1] ** 2 - self.radius**2
        disc = b * b - 4 * a * c
        count = np.zeros(len(lo), int)
        ok = (disc > 0) & (a > 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        for sgn in (-1.0, 1.0):
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (-b + sgn * sq) / (2 * a)
            p = lo + t[:, None] * ld
            hit = ok & (t > 0) & (p[:, 2] >= 0) & (p[:, 2] <= self.length)
            hit &= self._angle_in_range(np.arctan2(p[:, 1], p[:, 0]))
            count += hit
        return count

    def angles(self, m, endpoint=True):
        if self.full:
            return self.theta0 + np.linspace(0, TWO_PI, m, endpoint=False)
        return self.theta0 + np.linspace(0, self.span, m)

    def curve_eval(self, cid, m):
        if cid.startswith("end"):
            w = 0.0 if cid == "end0" else self.length
            th = self.angles(m)
            return self.eval(np.column_stack([th, np.full(m, w)]))
        th = self.theta0 + (0.0 if cid == "side0" else self.span)
        return self.eval(np.column_stack([np.full(m, th), np.linspace(0, self.length, m)]))

    def sample(self, spacing):
        kw = max(1, math.ceil(self.length / spacing))
        ka = max(2, math.ceil(self.span * self.radius / spacing))
        th = self.angles(ka if self.full else ka + 1)
        w = np.linspace(0, self.length, kw + 1)
        TH, W = np.meshgrid(th, w, indexing="ij")
        loc = np.column_stack([TH.ravel(), W.ravel()])
        pos, nrm = self.eval(loc)
        return loc, pos, nrm

    def offset_params(self, delta):
        check_offset(delta)
        return {"kind": self.kind, "radius": self.radius + self.orient * delta, "length": self.length}

    def to_dict(self):
        return {"kind": self.kind, **self.frame_dict(), "length": self.length,
                "span": self.span, "theta0": self.theta0}


class SphericalTriangle(Patch):
    """Octant of the unit sphere around ``origin``: all local coordinates >= 0.

    Boundary arcs are named by the local axis they are perpendicular to:
    ``arc0`` lies in the plane of local axes 1 and 2, and so on.
    """

    kind = "SphericalTriangle"
    curves = ("arc0", "arc1", "arc2")

    def __init__(self, origin, R, orient=1, radius=1.0):
        super().__init__(origin, R, orient)
        self.radius = float(radius)

    def area(self):
        return 0.5 * math.pi * self.radius**2

    def local_extent(self):
        return (0.0, 0.0, 0.0), (self.radius,) * 3

    def eval(self, loc):
        # loc = (psi, phi): azimuth in the (e1, e2) plane, latitude towards e3
        loc = np.atleast_2d(loc)
        psi, phi = loc[:, 0], loc[:, 1]
        d = np.column_stack([np.cos(phi) * np.cos(psi), np.cos(phi) * np.sin(psi), np.sin(phi)])
        return self.to_world(self.radius * d), self.orient * self.world_dir(d)

    def project(self, q):
        l = self.to_local(q)
        r = np.linalg.norm(l, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            dhat = l / r[:, None]
        valid = (r > 0) & np.all(dhat >= -DOMAIN_TOL, axis=1)
        dhat = np.nan_to_num(dhat)
        psi = np.arctan2(dhat[:, 1], dhat[:, 0])
        phi = np.arcsin(np.clip(dhat[:, 2], -1, 1))
        return {"valid": valid, "foot": self.to_world(self.radius * dhat),
                "normal": self.orient * self.world_dir(dhat),
                "delta": self.orient * (r - self.radius), "local": np.column_stack([psi, phi])}

    def ray_count(self, o, d):
        lo = self.to_local(o)
        ld = self.to_local(o + d) - lo
        a = np.sum(ld * ld, axis=1)
        b = 2 * np.sum(lo * ld, axis=1)
        c = np.sum(lo * lo, axis=1) - self.radius**2
        disc = b * b - 4 * a * c
        ok = disc > 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        count = np.zeros(len(lo), int)
        for sgn in (-1.0, 1.0):
            t = (-b + sgn * sq) / (2 * a)
            p = lo + t[:, None] * ld
            count += ok & (t > 0) & np.all(p >= 0, axis=1)
        return count

    def curve_eval(self, cid, m):
        s = np.linspace(0, HALF_PI, m)
        z = np.zeros(m)
        if cid == "arc2":  # equator, plane of e1 and e2
            loc = np.column_stack([s, z])
        elif cid == "arc1":  # plane of e1 and e3
            loc = np.column_stack([z, s])
        else:  # plane of e2 and e3
            loc = np.column_stack([np.full(m, HALF_PI), s])
        return self.eval(loc)

    def sample(self, spacing):
        kl = max(2, math.ceil(HALF_PI * self.radius / spacing))
        loc = []
        for phi in np.linspace(0, HALF_PI, kl + 1):
            ring = math.cos(phi) * self.radius * HALF_PI
            ka = max(1, math.ceil(ring / spacing))
            psi = np.linspace(0, HALF_PI, ka + 1) if ring > 1e-12 else np.array([0.0])
            loc.append(np.column_stack([psi, np.full(len(psi), phi)]))
        loc = np.vstack(loc)
        pos, nrm = self.eval(loc)
        return loc, pos, nrm

    def offset_params(self, delta):
        check_offset(delta)
        return {"kind": self.kind, "radius": self.radius + self.orient * delta}

    def to_dict(self):
        return {"kind": self.kind, **self.frame_dict(), "radius": self.radius}


class Joint(Patch):
    """Quarter arc revolved about the local w axis.

    In the (rho, w) half plane the arc is centred at (2, 1) with radius 1 and
    runs from the rim (rho=2, w=0), tangent to the face plane ``w = 0``, to the
    neck (rho=1, w=1), tangent to a unit cylinder continuing along +w. The
    normal points towards the arc centre.
    """

    kind = "Joint"
    curves = ("rim", "neck")
    core_rho = 2.0
    core_w = 1.0

    def __init__(self, origin, R, orient=1, arc_radius=1.0):
        super().__init__(origin, R, orient)
        self.arc_radius = float(arc_radius)

    def area(self):
        # surface of revolution: 2 pi * int_0^{pi/2} (2 - sin t) dt
        return TWO_PI * (math.pi - 1.0)

    def local_extent(self):
        return (-self.core_rho, -self.core_rho, 0.0), (self.core_rho, self.core_rho, self.core_w)

    def eval(self, loc):
        # loc = (psi, t): revolution angle, arc parameter (0 at rim, pi/2 at neck)
        loc = np.atleast_2d(loc)
        psi, t = loc[:, 0], loc[:, 1]
        rho = self.core_rho - self.arc_radius * np.sin(t)
        w = self.core_w - self.arc_radius * np.cos(t)
        erho = np.column_stack([np.cos(psi), np.sin(psi), np.zeros_like(psi)])
        ew = np.column_stack([np.zeros((len(psi), 2)), np.ones_like(psi)])
        pos = self.to_world(rho[:, None] * erho + w[:, None] * ew)
        nrm = np.sin(t)[:, None] * erho + np.cos(t)[:, None] * ew
        return pos, self.orient * self.world_dir(nrm)

    def project(self, q):
        l = self.to_local(q)
        rho = np.hypot(l[:, 0], l[:, 1])
        psi = np.arctan2(l[:, 1], l[:, 0])
        dr, dw = rho - self.core_rho, l[:, 2] - self.core_w
        dist = np.hypot(dr, dw)
        with np.errstate(divide="ignore", invalid="ignore"):
            ur, uw = dr / dist, dw / dist
        valid = (dist > 0) & (ur <= DOMAIN_TOL) & (uw <= DOMAIN_TOL)
        t = np.arctan2(-np.nan_to_num(ur), -np.nan_to_num(uw))
        pos, nrm = self.eval(np.column_stack([psi, t]))
        return {"valid": valid, "foot": pos, "normal": nrm,
                "delta": self.orient * (self.arc_radius - dist), "local": np.column_stack([psi, t])}

    def ray_count(self, o, d):
        lo = self.to_local(o)
        ld = self.to_local(o + d) - lo
        R0, r0 = self.core_rho, self.arc_radius
        count = np.zeros(len(lo), int)
        # cheap reject: the joint lies inside the ball of radius sqrt(4.25) about (0, 0, 1/2)
        c = np.array([0.0, 0.0, 0.5])
        rel = lo - c
        dd = np.sum(ld * ld, axis=1)
        tc = np.maximum(-np.sum(rel * ld, axis=1) / dd, 0.0)
        miss = np.linalg.norm(rel + tc[:, None] * ld, axis=1) > math.sqrt(4.25) + 1e-9
        for k in np.flatnonzero(~miss):
            ox, oy, oz = lo[k, 0], lo[k, 1], lo[k, 2] - self.core_w
            dx, dy, dz = ld[k]
            # (|p|^2 + R^2 - r^2)^2 = 4 R^2 (x^2 + y^2), p relative to the core plane
            a2 = dx * dx + dy * dy + dz * dz
            b2 = 2 * (ox * dx + oy * dy + oz * dz)
            c2 = ox * ox + oy * oy + oz * oz + R0 * R0 - r0 * r0
            coeffs = [a2 * a2, 2 * a2 * b2, b2 * b2 + 2 * a2 * c2 - 4 * R0 * R0 * (dx * dx + dy * dy),
                      2 * b2 * c2 - 8 * R0 * R0 * (ox * dx + oy * dy),
                      c2 * c2 - 4 * R0 * R0 * (ox * ox + oy * oy)]
            for root in np.roots(coeffs):
                if abs(root.imag) > 1e-9 * max(1.0, abs(root.real)) or root.real <= 0:
                    continue
                t = root.real
                px, py, pz = ox + t * dx, oy + t * dy, oz + t * dz
                rho = math.hypot(px, py)
                if rho <= R0 and pz <= 0:
                    count[k] += 1
        return count

    def curve_eval(self, cid, m):
        psi = np.linspace(0, TWO_PI, m, endpoint=False)
        t = np.zeros(m) if cid == "rim" else np.full(m, HALF_PI)
        return self.eval(np.column_stack([psi, t]))

    def sample(self, spacing):
        kt = max(2, math.ceil(HALF_PI / spacing))
        kp = max(8, math.ceil(TWO_PI * self.core_rho / spacing))
        T, P = np.meshgrid(np.linspace(0, HALF_PI, kt + 1), np.linspace(0, TWO_PI, kp, endpoint=False), indexing="ij")
        loc = np.column_stack([P.ravel(), T.ravel()])
        pos, nrm = self.eval(loc)
        return loc, pos, nrm

    def offset_params(self, delta):
        check_offset(delta)
        return {"kind": self.kind, "arc_radius": self.arc_radius - self.orient * delta,
                "rim_radius": self.core_rho, "neck_radius": self.core_rho - self.arc_radius + self.orient * delta}

    def to_dict(self):
        return {"kind": self.kind, **self.frame_dict()}


def patch_from_dict(d):
    R = make_frame(*d["axes"])
    kind = d["kind"]
    orient = d.get("orient", 1)
    if kind == "Square":
        return Square(d["origin"], R, d["side"], d.get("holes", ()), orient)
    if kind in ("Cylinder", "QuarterCylinder"):
        return Cylinder(d["origin"], R, d["length"], d["span"], d.get("theta0", 0.0), orient)
    if kind == "SphericalTriangle":
        return SphericalTriangle(d["origin"], R, orient, d.get("radius", 1.0))
    if kind == "Joint":
        return Joint(d["origin"], R, orient)
    raise ValueError(f"unknown patch kind {kind!r}")
