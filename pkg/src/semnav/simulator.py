"""Deterministic 2D world simulation: scripted actors, unicycle robot,
exact-geometry lidar, and a semantic detector with line-of-sight occlusion.

Everything a run produces is a pure function of (world file, parameters,
seed): actors follow their waypoint cycles, sensor geometry is solved in
closed form rather than sampled on a grid, and the only randomness is the
optional lidar range noise drawn from one seeded generator. Space footprints
are floor regions, not obstacles — only static non-space elements and actor
disks return lidar echoes or occlude the semantic sensor.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Point2,
    Pose2,
    normalize_angle,
    ray_segment_intersection,
    segment_crosses_any,
)
from .learning import Detection
from .mapgen import SensorSpec
from .navigation import RobotState
from .world import WorldDescription

_MIN_HIT = 1e-9  # hits closer than this are the robot itself


@dataclass(frozen=True)
class LidarScan:
    tick: int
    pose: Pose2
    range_max: float
    angles: tuple[float, ...]  # beam angles relative to pose.heading
    ranges: tuple[float, ...]

    @property
    def beam_count(self) -> int:
        return len(self.ranges)


@dataclass(frozen=True)
class SemanticFrame:
    tick: int
    pose: Pose2
    detections: tuple[Detection, ...]


@dataclass
class WorldState:
    world: WorldDescription
    tick: int
    robot: RobotState
    actor_positions: dict[str, Point2]
    actor_targets: dict[str, int]  # index of the waypoint being approached
    static_collisions: int = 0
    actor_collisions: int = 0
    noise_sigma: float = 0.0
    rng: random.Random = field(default_factory=lambda: random.Random(0))
    trace: list[str] = field(default_factory=list)


def _trace_record(ws: WorldState, v: float, omega: float) -> str:
    pose = ws.robot.pose
    collisions = ws.static_collisions + ws.actor_collisions
    return (
        f"{ws.tick} {pose.x:.9f} {pose.y:.9f} {pose.heading:.9f} "
        f"{v:.9f} {omega:.9f} {collisions}"
    )


def make_world_state(
    world: WorldDescription, seed: int = 0, noise_sigma: float = 0.0
) -> WorldState:
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    ws = WorldState(
        world=world,
        tick=0,
        robot=RobotState(world.robot_spawn),
        actor_positions={a.symbol: a.waypoints[0] for a in world.actors},
        actor_targets={
            a.symbol: 1 % len(a.waypoints) for a in world.actors
        },
        noise_sigma=noise_sigma,
        rng=random.Random(seed),
    )
    ws.trace.append(_trace_record(ws, 0.0, 0.0))
    return ws


def static_edges(
    world: WorldDescription, exclude_symbol: str | None = None
) -> list[tuple[Point2, Point2]]:
    """Boundary segments of all static non-space footprints."""
    edges: list[tuple[Point2, Point2]] = []
    for rec in world.elements:
        if rec.is_space or rec.symbol == exclude_symbol:
            continue
        if not rec.explicit.physical.is_static or rec.explicit.model2d is None:
            continue
        edges.extend(rec.explicit.model2d.edges())
    return edges


def _advance_actor(
    position: Point2, target_index: int, waypoints: tuple[Point2, ...], distance: float
) -> tuple[Point2, int]:
    if len(waypoints) < 2:
        return position, target_index
    remaining = distance
    snaps = 0
    while remaining > 1e-12:
        target = waypoints[target_index]
        gap = position.distance_to(target)
        if gap <= remaining:
            position = target
            remaining -= gap
            target_index = (target_index + 1) % len(waypoints)
            snaps = snaps + 1 if gap < 1e-12 else 0
            if snaps > len(waypoints):  # degenerate script: all points coincide
                break
            continue
        position = Point2(
            position.x + (target.x - position.x) * remaining / gap,
            position.y + (target.y - position.y) * remaining / gap,
        )
        break
    return position, target_index


def step(ws: WorldState, dt: float, robot_command: tuple[float, float]) -> WorldState:
    """Advance one tick in place: actors first, then the robot with motion
    clamped at the first static contact. Returns ws for chaining."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    v, omega = robot_command

    for actor in ws.world.actors:
        ws.actor_positions[actor.symbol], ws.actor_targets[actor.symbol] = _advance_actor(
            ws.actor_positions[actor.symbol],
            ws.actor_targets[actor.symbol],
            actor.waypoints,
            actor.speed * dt,
        )

    pose = ws.robot.pose
    move = v * dt
    new_x = pose.x + move * math.cos(pose.heading)
    new_y = pose.y + move * math.sin(pose.heading)
    if abs(move) > 1e-15:
        ux = math.cos(pose.heading) * (1.0 if move >= 0 else -1.0)
        uy = math.sin(pose.heading) * (1.0 if move >= 0 else -1.0)
        length = abs(move)
        nearest = None
        for a, b in static_edges(ws.world):
            t = ray_segment_intersection(pose.x, pose.y, ux, uy, a, b)
            if t is not None and t <= length and (nearest is None or t < nearest):
                nearest = t
        if nearest is not None:
            allowed = max(0.0, nearest - _MIN_HIT)
            new_x = pose.x + ux * allowed
            new_y = pose.y + uy * allowed
            ws.static_collisions += 1
    new_pose = Pose2(new_x, new_y, normalize_angle(pose.heading + omega * dt))
    ws.robot = RobotState(new_pose, v, omega)

    here = new_pose.position
    for actor in ws.world.actors:
        gap = here.distance_to(ws.actor_positions[actor.symbol])
        if gap < ws.world.robot_radius + actor.footprint_radius:
            ws.actor_collisions += 1

    ws.tick += 1
    ws.trace.append(_trace_record(ws, v, omega))
    return ws


# --- sensors ---

def _beam_angles(fov: float, beam_count: int) -> list[float]:
    if beam_count == 1:
        return [-fov / 2.0]
    spacing = fov / (beam_count - 1)
    return [-fov / 2.0 + i * spacing for i in range(beam_count)]


def lidar_scan(ws: WorldState, spec: SensorSpec) -> LidarScan:
    """Exact per-beam minimum intersection over static footprint edges and
    actor disks, capped at range_max."""
    lidar = spec.lidar2d
    if lidar is None:
        raise ValueError("sensor spec has no 2D lidar")
    pose = ws.robot.pose
    rel = _beam_angles(lidar.fov, lidar.beam_count)
    absolute = np.asarray(rel) + pose.heading
    dx = np.cos(absolute)
    dy = np.sin(absolute)
    best = np.full(len(rel), np.inf)

    edges = static_edges(ws.world)
    if edges:
        ax = np.asarray([a.x for a, _ in edges])
        ay = np.asarray([a.y for a, _ in edges])
        ex = np.asarray([b.x - a.x for a, b in edges])
        ey = np.asarray([b.y - a.y for a, b in edges])
        denom = dx[:, None] * ey[None, :] - dy[:, None] * ex[None, :]
        t_num = (ax - pose.x) * ey - (ay - pose.y) * ex  # per edge
        u_num = (ax - pose.x)[None, :] * dy[:, None] - (ay - pose.y)[None, :] * dx[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = t_num[None, :] / denom
            u = u_num / denom
        valid = (
            (np.abs(denom) >= 1e-15)
            & (t >= _MIN_HIT)
            & (u >= -1e-12)
            & (u <= 1.0 + 1e-12)
        )
        t = np.where(valid, t, np.inf)
        best = np.minimum(best, t.min(axis=1))

    for actor in ws.world.actors:
        center = ws.actor_positions[actor.symbol]
        fx = pose.x - center.x
        fy = pose.y - center.y
        b = fx * dx + fy * dy
        c = fx * fx + fy * fy - actor.footprint_radius**2
        disc = b * b - c
        hit = disc >= 0.0
        root = np.sqrt(np.where(hit, disc, 0.0))
        t1 = -b - root
        t2 = -b + root
        t = np.where(t1 >= _MIN_HIT, t1, np.where(t2 >= _MIN_HIT, t2, np.inf))
        t = np.where(hit, t, np.inf)
        best = np.minimum(best, t)

    ranges = np.minimum(best, lidar.range_m)
    if ws.noise_sigma > 0.0:
        noisy = [
            min(lidar.range_m, max(_MIN_HIT, r + ws.rng.gauss(0.0, ws.noise_sigma)))
            for r in ranges
        ]
        ranges = np.asarray(noisy)
    return LidarScan(
        tick=ws.tick,
        pose=pose,
        range_max=lidar.range_m,
        angles=tuple(rel),
        ranges=tuple(float(r) for r in ranges),
    )


def _visible(ws: WorldState, spec: SensorSpec, point: Point2,
             own_symbol: str | None) -> bool:
    sem = spec.semantic3d
    pose = ws.robot.pose
    gap = pose.position.distance_to(point)
    if gap > sem.range_m:
        return False
    bearing = math.atan2(point.y - pose.y, point.x - pose.x)
    if gap > 1e-12 and abs(normalize_angle(bearing - pose.heading)) > sem.fov / 2 + 1e-12:
        return False
    return not segment_crosses_any(
        pose.position, point, static_edges(ws.world, exclude_symbol=own_symbol)
    )


def semantic_detect(ws: WorldState, spec: SensorSpec) -> SemanticFrame:
    """Elements and actors whose reference point lies in the sensor cone with
    clear line of sight. An element's own footprint never occludes it; the
    field-of-view boundary is inclusive."""
    if spec.semantic3d is None:
        raise ValueError("sensor spec has no 3D semantic sensor")
    detections: list[Detection] = []
    for rec in sorted(ws.world.elements, key=lambda r: r.symbol):
        if rec.is_space or rec.explicit.model3d is None:
            continue
        point = rec.position()
        if point is None:
            continue  # geometry-free element: nothing to localize
        if _visible(ws, spec, point, rec.symbol):
            detections.append(
                Detection(
                    symbol=rec.symbol,
                    semantic_class=rec.explicit.model3d.semantic_class,
                    position=point,
                    tick=ws.tick,
                )
            )
    for actor in sorted(ws.world.actors, key=lambda a: a.symbol):
        point = ws.actor_positions[actor.symbol]
        if _visible(ws, spec, point, None):
            detections.append(
                Detection(
                    symbol=None,
                    semantic_class=actor.class_label,
                    position=point,
                    tick=ws.tick,
                )
            )
    return SemanticFrame(tick=ws.tick, pose=ws.robot.pose, detections=tuple(detections))


# --- tracing ---

def trace_to_csv(trace: list[str]) -> str:
    lines = ["tick,x,y,theta,v,omega,collisions"]
    lines.extend(record.replace(" ", ",") for record in trace)
    return "\n".join(lines) + "\n"


def trace_hash(trace: list[str]) -> str:
    """16-hex-digit digest of the canonical trace text; empty trace hashes to
    the blake2b-64 digest of the empty string."""
    digest = hashlib.blake2b("\n".join(trace).encode("ascii"), digest_size=8)
    return digest.hexdigest()
