"""2D continuous world: entity state, stepping, and visibility geometry.

Entities are discs of one shared radius on a square field centered on the
origin. Agents and adversaries move; landmarks and targets are static.
All functions are pure: they take a state and return a new one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi

AGENT = "agent"
ADVERSARY = "adversary"
LANDMARK = "landmark"
TARGET = "target"
ENTITY_CLASSES = (AGENT, ADVERSARY, LANDMARK, TARGET)
MOVABLE_CLASSES = (AGENT, ADVERSARY)

# Slack for inclusive angular comparisons (FOV boundary, rotation cap).
ANGLE_EPS = 1e-9


class ConstraintViolation(Exception):
    """An action violated a world constraint; the message names the entity."""


def wrap_angle(theta: float) -> float:
    """Normalize an angle to [0, 2*pi)."""
    return theta % TWO_PI


def angle_diff(a: float, b: float) -> float:
    """Signed smallest difference a - b, in (-pi, pi]."""
    d = (a - b) % TWO_PI
    if d > math.pi:
        d -= TWO_PI
    return d


@dataclass(frozen=True, order=True)
class EntityId:
    cls: str
    index: int

    def __post_init__(self):
        if self.cls not in ENTITY_CLASSES:
            raise ValueError(f"unknown entity class {self.cls!r}")
        if self.index < 0:
            raise ValueError("entity index must be non-negative")

    def __str__(self):
        return f"{self.cls}{self.index}"


@dataclass(frozen=True)
class Pose:
    position: np.ndarray  # (2,) meters
    heading: float        # radians in [0, 2*pi)
    velocity: np.ndarray  # (2,) m per step


@dataclass(frozen=True)
class WorldConfig:
    field_side: float = 0.8
    entity_radius: float = 0.03
    fov: float = math.radians(120.0)
    dt: float = 0.1
    mass: float = 1.0
    damping: float = 0.25
    max_step_rotation: float | None = None  # radians; None = unlimited
    max_step_move: float = 0.05             # meters per kinematic step
    max_force: float = 1.0                  # newtons

    def __post_init__(self):
        if self.field_side <= 0:
            raise ValueError("field_side must be positive")
        if not (0.0 < self.fov <= TWO_PI):
            raise ValueError("fov must be in (0, 2*pi]")
        if 2.0 * self.entity_radius >= self.field_side:
            raise ValueError("entities must fit inside the field")

    @property
    def half_side(self) -> float:
        return self.field_side / 2.0

    @property
    def diagonal(self) -> float:
        return self.field_side * math.sqrt(2.0)


@dataclass(frozen=True)
class WorldState:
    """Poses of every entity at one step; the single source of truth."""

    entities: tuple[EntityId, ...]
    positions: np.ndarray   # (E, 2)
    headings: np.ndarray    # (E,)
    velocities: np.ndarray  # (E, 2)
    step_index: int = 0
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("non-finite position in world state")
        object.__setattr__(
            self, "_index", {e: i for i, e in enumerate(self.entities)}
        )

    def index_of(self, entity: EntityId) -> int:
        return self._index[entity]

    def pose(self, entity: EntityId) -> Pose:
        i = self.index_of(entity)
        return Pose(
            position=self.positions[i].copy(),
            heading=float(self.headings[i]),
            velocity=self.velocities[i].copy(),
        )

    def of_class(self, cls: str) -> list[EntityId]:
        return [e for e in self.entities if e.cls == cls]

    @property
    def agents(self) -> list[EntityId]:
        return self.of_class(AGENT)

    @property
    def movers(self) -> list[EntityId]:
        return [e for e in self.entities if e.cls in MOVABLE_CLASSES]


def make_state(
    entities: list[EntityId],
    positions: np.ndarray,
    headings: np.ndarray | None = None,
    velocities: np.ndarray | None = None,
    step_index: int = 0,
) -> WorldState:
    positions = np.asarray(positions, dtype=np.float64).reshape(len(entities), 2)
    if headings is None:
        headings = np.zeros(len(entities))
    if velocities is None:
        velocities = np.zeros((len(entities), 2))
    return WorldState(
        entities=tuple(entities),
        positions=positions.copy(),
        headings=np.mod(np.asarray(headings, dtype=np.float64), TWO_PI),
        velocities=np.asarray(velocities, dtype=np.float64).reshape(len(entities), 2).copy(),
        step_index=step_index,
    )


@dataclass(frozen=True)
class KinematicAction:
    heading: float                 # absolute new heading, radians
    move: tuple[float, float] = (0.0, 0.0)  # displacement, meters


def _clamp_positions(positions: np.ndarray, config: WorldConfig) -> np.ndarray:
    h = config.half_side
    return np.clip(positions, -h, h)


def step_kinematic(
    state: WorldState,
    actions: dict[EntityId, KinematicAction],
    config: WorldConfig,
) -> WorldState:
    """Apply view-rotation / displacement actions and clamp to the field."""
    positions = state.positions.copy()
    headings = state.headings.copy()
    for entity, action in actions.items():
        i = state.index_of(entity)
        if entity.cls not in MOVABLE_CLASSES:
            raise ConstraintViolation(f"{entity} is not movable")
        new_heading = wrap_angle(float(action.heading))
        if config.max_step_rotation is not None:
            rot = abs(angle_diff(new_heading, float(headings[i])))
            if rot > config.max_step_rotation + ANGLE_EPS:
                raise ConstraintViolation(
                    f"{entity}: rotation {rot:.6f} rad exceeds cap "
                    f"{config.max_step_rotation:.6f} rad"
                )
        move = np.asarray(action.move, dtype=np.float64)
        if not np.all(np.isfinite(move)):
            raise ConstraintViolation(f"{entity}: non-finite move")
        if np.linalg.norm(move) > config.max_step_move + 1e-12:
            raise ConstraintViolation(
                f"{entity}: move {np.linalg.norm(move):.6f} m exceeds cap "
                f"{config.max_step_move:.6f} m"
            )
        headings[i] = new_heading
        positions[i] = positions[i] + move
    return replace(
        state,
        positions=_clamp_positions(positions, config),
        headings=headings,
        step_index=state.step_index + 1,
    )


def step_dynamic(
    state: WorldState,
    forces: dict[EntityId, np.ndarray],
    config: WorldConfig,
) -> WorldState:
    """Semi-implicit Euler: v <- (1-damping)*v + (F/m)*dt; p <- p + v*dt."""
    positions = state.positions.copy()
    velocities = state.velocities.copy()
    force_arr = np.zeros_like(velocities)
    for entity, f in forces.items():
        if entity.cls not in MOVABLE_CLASSES:
            raise ConstraintViolation(f"{entity} is not movable")
        f = np.asarray(f, dtype=np.float64)
        if not np.all(np.isfinite(f)):
            raise ConstraintViolation(f"{entity}: non-finite force")
        if np.linalg.norm(f) > config.max_force + 1e-12:
            raise ConstraintViolation(
                f"{entity}: force {np.linalg.norm(f):.6f} N exceeds cap "
                f"{config.max_force:.6f} N"
            )
        force_arr[state.index_of(entity)] = f
    movable = np.array([e.cls in MOVABLE_CLASSES for e in state.entities])
    velocities[movable] = (
        (1.0 - config.damping) * velocities[movable]
        + (force_arr[movable] / config.mass) * config.dt
    )
    positions[movable] = positions[movable] + velocities[movable] * config.dt
    return replace(
        state,
        positions=_clamp_positions(positions, config),
        velocities=velocities,
        step_index=state.step_index + 1,
    )


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Distance from point p to the closed segment [a, b]."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float((p - a) @ ab) / denom
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * ab)))


def line_of_sight(
    state: WorldState, a: EntityId, b: EntityId, config: WorldConfig
) -> bool:
    """True iff no third entity's disc intersects the open segment a->b."""
    if a == b:
        raise ValueError("line_of_sight endpoints must differ")
    pa = state.positions[state.index_of(a)]
    pb = state.positions[state.index_of(b)]
    for other in state.entities:
        if other == a or other == b:
            continue
        po = state.positions[state.index_of(other)]
        if _point_segment_distance(po, pa, pb) < config.entity_radius:
            return False
    return True


def bearing(state: WorldState, observer: EntityId, target: EntityId) -> float:
    """Absolute bearing of target's center from observer's center."""
    po = state.positions[state.index_of(observer)]
    pt = state.positions[state.index_of(target)]
    d = pt - po
    return wrap_angle(math.atan2(float(d[1]), float(d[0])))


def in_fov(
    state: WorldState,
    observer: EntityId,
    target: EntityId,
    fov: float,
) -> bool:
    """True iff the target center's bearing lies within the observer's FOV.

    The boundary is inclusive: a bearing of exactly fov/2 off the heading
    counts as visible.
    """
    if fov >= TWO_PI:
        return True
    heading = float(state.headings[state.index_of(observer)])
    rel = abs(angle_diff(bearing(state, observer, target), heading))
    return rel <= fov / 2.0 + ANGLE_EPS


def visible(
    state: WorldState, observer: EntityId, target: EntityId, config: WorldConfig
) -> bool:
    """in_fov and line_of_sight, the visibility relation used throughout."""
    return in_fov(state, observer, target, config.fov) and line_of_sight(
        state, observer, target, config
    )


def collisions(state: WorldState, config: WorldConfig) -> list[tuple[EntityId, EntityId]]:
    """Unordered pairs whose center distance is strictly below 2*radius."""
    pairs = []
    n = len(state.entities)
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.linalg.norm(state.positions[i] - state.positions[j]))
            if d < 2.0 * config.entity_radius:
                pairs.append((state.entities[i], state.entities[j]))
    return pairs
