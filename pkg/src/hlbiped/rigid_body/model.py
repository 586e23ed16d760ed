"""Robot description and state containers for planar bipeds.

Parameter files are JSON with the schema::

    {
      "name": str, "version": int, "gravity": float, "nominal_height": float,
      "links": [{"name", "parent" (name | null), "joint" (coordinate name),
                 "offset" [x, z] (joint location in the parent frame),
                 "mass", "com" [x, z], "inertia" (about the CoM), "length"}],
      "joints": [{"name", "torque_limit"}],          # actuated joints, in order
      "feet": {"type": "point" | "flat", "length"?,
               "left":  {"link", "sole" [x, z], "heel"?, "toe"?},
               "right": {...}}
    }

Links must be listed parents-first. The generalized coordinates are
``[x, z, pitch]`` followed by the actuated joints in file order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

PARAM_DIR = Path(__file__).parent / "params"
VARIANTS = ("rabbit", "rabbit_ideal", "walker2d")
LEGS = ("left", "right")


@dataclass(frozen=True, eq=False)
class LinkParams:
    name: str
    parent: int
    coord: int
    offset: tuple[float, float]
    mass: float
    com: tuple[float, float]
    inertia: float
    length: float


@dataclass(frozen=True, eq=False)
class FootParams:
    link: int
    sole: tuple[float, float]
    heel: tuple[float, float] | None = None
    toe: tuple[float, float] | None = None


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Kinematic/inertial description of a planar biped.

    The numeric arrays (``parent``, ``coord``, ``offset``, ``com``, ``mass``,
    ``inertia``) are the compiled-kernel view of ``links``.
    """

    name: str
    links: tuple[LinkParams, ...]
    joint_names: tuple[str, ...]
    torque_limits: np.ndarray
    feet: dict
    foot_type: str
    gravity: float = 9.81
    nominal_height: float = 0.75
    foot_length: float = 0.0
    version: int = 1
    parent: np.ndarray = field(init=False, repr=False)
    coord: np.ndarray = field(init=False, repr=False)
    offset: np.ndarray = field(init=False, repr=False)
    com: np.ndarray = field(init=False, repr=False)
    mass: np.ndarray = field(init=False, repr=False)
    inertia: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        links = self.links
        set_ = object.__setattr__
        set_(self, "parent", np.array([l.parent for l in links], dtype=np.int64))
        set_(self, "coord", np.array([l.coord for l in links], dtype=np.int64))
        set_(self, "offset", np.array([l.offset for l in links], dtype=float))
        set_(self, "com", np.array([l.com for l in links], dtype=float))
        set_(self, "mass", np.array([l.mass for l in links], dtype=float))
        set_(self, "inertia", np.array([l.inertia for l in links], dtype=float))
        if np.any(self.mass <= 0) or np.any(self.inertia <= 0):
            raise ValueError(f"{self.name}: masses and inertias must be positive")
        if any(l.length <= 0 for l in links):
            raise ValueError(f"{self.name}: link lengths must be positive")
        for i, l in enumerate(links):
            if l.parent >= i:
                raise ValueError(f"{self.name}: link {l.name!r} listed before its parent")

    @property
    def n_dof(self) -> int:
        return 3 + len(self.joint_names)

    @property
    def n_act(self) -> int:
        return len(self.joint_names)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @property
    def fully_actuated(self) -> bool:
        return self.foot_type == "flat"

    @property
    def B(self) -> np.ndarray:
        """Actuation matrix mapping joint torques to generalized forces."""
        B = np.zeros((self.n_dof, self.n_act))
        B[3:, :] = np.eye(self.n_act)
        return B

    def coord_index(self, name: str) -> int:
        if name in ("x", "z", "pitch"):
            return ("x", "z", "pitch").index(name)
        return 3 + self.joint_names.index(name)

    def leg_coords(self, leg: str) -> list[int]:
        return [i for i, j in enumerate(self.joint_names, start=3) if j.endswith("_" + leg)]

    def contact_rows(self, leg: str) -> np.ndarray:
        """Constraint rows (link, local x, local z, axis) pinning a stance foot.

        Point feet pin the sole point in x and z. Flat feet pin the toe in x
        and z and the heel in z, which fixes the foot's position and pitch.
        """
        f = self.feet[leg]
        if self.foot_type == "point":
            pts = [(f.sole, 0), (f.sole, 1)]
        else:
            pts = [(f.toe, 0), (f.toe, 1), (f.heel, 1)]
        return np.array([[f.link, c[0], c[1], ax] for c, ax in pts], dtype=float)

    def ground_points(self, leg: str) -> list[tuple[float, float]]:
        """Body points of a foot that are checked against the terrain."""
        f = self.feet[leg]
        if self.foot_type == "point":
            return [f.sole]
        return [f.heel, f.toe]

    def scaled_inertia(self, factor: float, name: str | None = None) -> "RobotModel":
        links = tuple(replace(l, inertia=l.inertia * factor) for l in self.links)
        return replace(self, links=links, name=name or self.name)


def _parse(d: dict) -> RobotModel:
    joints = [j["name"] for j in d["joints"]]
    coords = ["x", "z", "pitch"] + joints
    names = [l["name"] for l in d["links"]]
    links = []
    for l in d["links"]:
        parent = -1 if l["parent"] is None else names.index(l["parent"])
        links.append(LinkParams(
            name=l["name"], parent=parent, coord=coords.index(l["joint"]),
            offset=tuple(l["offset"]), mass=float(l["mass"]), com=tuple(l["com"]),
            inertia=float(l["inertia"]), length=float(l["length"]),
        ))
    feet = {}
    for leg in LEGS:
        f = d["feet"][leg]
        feet[leg] = FootParams(
            link=names.index(f["link"]), sole=tuple(f["sole"]),
            heel=tuple(f["heel"]) if "heel" in f else None,
            toe=tuple(f["toe"]) if "toe" in f else None,
        )
    return RobotModel(
        name=d["name"], links=tuple(links), joint_names=tuple(joints),
        torque_limits=np.array([j["torque_limit"] for j in d["joints"]], dtype=float),
        feet=feet, foot_type=d["feet"]["type"], gravity=float(d.get("gravity", 9.81)),
        nominal_height=float(d["nominal_height"]), foot_length=float(d["feet"].get("length", 0.0)),
        version=int(d.get("version", 1)),
    )


def load_model(name_or_path: str | Path) -> RobotModel:
    """Load an embedded variant (``rabbit``, ``rabbit_ideal``, ``walker2d``) or a JSON file."""
    path = Path(name_or_path)
    if str(name_or_path) in VARIANTS:
        path = PARAM_DIR / f"{name_or_path}.json"
    if not path.exists():
        raise FileNotFoundError(f"no robot parameter file {name_or_path!r}")
    with open(path) as fh:
        return _parse(json.load(fh))


@dataclass(eq=False)
class FullState:
    """Full-order state plus hybrid bookkeeping.

    ``contact_point`` is the world position of the stance sole point;
    ``contact_ref`` holds the pinned values of the stance constraint rows.
    """

    q: np.ndarray
    qd: np.ndarray
    stance_leg: str = "left"
    t_step: float = 0.0
    contact_point: np.ndarray = field(default_factory=lambda: np.zeros(2))
    contact_ref: np.ndarray | None = None

    @property
    def swing_leg(self) -> str:
        return "right" if self.stance_leg == "left" else "left"

    def copy(self) -> "FullState":
        return FullState(
            self.q.copy(), self.qd.copy(), self.stance_leg, self.t_step,
            self.contact_point.copy(),
            None if self.contact_ref is None else self.contact_ref.copy(),
        )


@dataclass(frozen=True, eq=False)
class ContactSolution:
    qdd: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True)
class TerrainSpec:
    """Planar slope through the origin: z = tan(alpha) x."""

    alpha: float = 0.0

    def height(self, x):
        return np.tan(self.alpha) * x
