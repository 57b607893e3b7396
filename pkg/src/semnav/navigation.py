"""Layered driving map, global planning, and incremental replanning.

The costmap stacks three layers and takes their maximum per cell: a static
layer from the metric map (occupied 254, unknown 253, free 0), an inflation
layer around lethal cells (200 within the robot radius, decaying linearly to
zero at twice the radius), and a dynamic layer of recent sensor hits (254
with a time-to-live). Cells at or above 253 are untraversable.

Moving into a cell costs step_length * (1 + composite/100) meters, where
step_length is one resolution unit for cardinal moves and sqrt(2) units for
diagonal ones; diagonal moves additionally require both adjacent cardinal
cells to be traversable. Because every edge weight is (100 + c) or
(100 + c) * sqrt(2) scaled by resolution/100, any path length is exactly
resolution * (a + b*sqrt(2)) / 100 for non-negative integers a and b, and
sqrt(2) being irrational makes that pair unique per length. All searches
here therefore carry costs as integer pairs and compare them exactly, so
the initial planner, the incremental replanner, and any from-scratch
re-check agree on optimal cost bit-for-bit.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt

from .geometry import Point2, Pose2, normalize_angle
from .mapgen import FREE, OCCUPIED, UNKNOWN, MetricLayer

LETHAL = 254
UNKNOWN_COST = 253
INSCRIBED = 200
DEFAULT_TTL = 30

# fixed neighbor order: cardinals first, then diagonals
_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))


class ExactCost:
    """A length of the form (a + b*sqrt(2)) scaled units, a and b integers.

    Comparisons are exact integer sign analysis, never floating point, so
    equal-cost ties and orderings are decided identically everywhere.
    """

    __slots__ = ("a", "b", "is_inf")

    def __init__(self, a: int = 0, b: int = 0, is_inf: bool = False):
        self.a = a
        self.b = b
        self.is_inf = is_inf

    def plus(self, other: "ExactCost") -> "ExactCost":
        if self.is_inf or other.is_inf:
            return INFINITE
        return ExactCost(self.a + other.a, self.b + other.b)

    def step(self, cell_cost: int, diagonal: bool) -> "ExactCost":
        """This cost extended by one move into a cell of the given cost."""
        if self.is_inf:
            return INFINITE
        if diagonal:
            return ExactCost(self.a, self.b + 100 + cell_cost)
        return ExactCost(self.a + 100 + cell_cost, self.b)

    def to_meters(self, resolution: float) -> float:
        if self.is_inf:
            return math.inf
        return resolution * (self.a + self.b * math.sqrt(2)) / 100.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExactCost):
            return NotImplemented
        if self.is_inf or other.is_inf:
            return self.is_inf and other.is_inf
        return self.a == other.a and self.b == other.b

    def __lt__(self, other: "ExactCost") -> bool:
        if self.is_inf:
            return False
        if other.is_inf:
            return True
        da = self.a - other.a
        db = self.b - other.b
        # sign of da + db*sqrt(2)
        if da >= 0 and db >= 0:
            return False
        if da <= 0 and db <= 0:
            return not (da == 0 and db == 0)
        if da > 0:  # db < 0: negative iff da < -db*sqrt(2) iff da^2 < 2*db^2
            return da * da < 2 * db * db
        # da < 0, db > 0: negative iff -da > db*sqrt(2) iff da^2 > 2*db^2
        return da * da > 2 * db * db

    def __le__(self, other: "ExactCost") -> bool:
        return self == other or self < other

    def __gt__(self, other: "ExactCost") -> bool:
        return not self <= other

    def __ge__(self, other: "ExactCost") -> bool:
        return not self < other

    def __repr__(self) -> str:
        if self.is_inf:
            return "ExactCost(inf)"
        return f"ExactCost({self.a}, {self.b})"


ZERO = ExactCost()
INFINITE = ExactCost(is_inf=True)


def octile(a: tuple[int, int], b: tuple[int, int]) -> ExactCost:
    """Octile distance in scaled units: admissible since every move costs at
    least (100) straight or (100)*sqrt(2) diagonal."""
    dc = abs(a[0] - b[0])
    dr = abs(a[1] - b[1])
    lo, hi = (dc, dr) if dc < dr else (dr, dc)
    return ExactCost(100 * (hi - lo), 100 * lo)


class DrivingMap:
    """Static + inflation + dynamic costmap over a metric layer."""

    def __init__(self, metric: MetricLayer, robot_radius: float, ttl: int = DEFAULT_TTL):
        if robot_radius <= 0:
            raise ValueError("robot_radius must be > 0")
        extent = min(metric.width, metric.height) * metric.resolution
        if robot_radius > extent:
            raise ValueError(
                f"robot radius {robot_radius} exceeds map extent {extent}"
            )
        if ttl <= 0:
            raise ValueError("ttl must be > 0")
        self.resolution = metric.resolution
        self.origin = metric.origin
        self.width = metric.width
        self.height = metric.height
        self.ttl = ttl
        self.robot_radius = robot_radius

        static = np.zeros(metric.cells.shape, dtype=np.int16)
        static[metric.cells == OCCUPIED] = LETHAL
        static[metric.cells == UNKNOWN] = UNKNOWN_COST

        lethal = metric.cells == OCCUPIED
        if lethal.any():
            # exact integer squared cell distance to the nearest lethal cell
            idx = distance_transform_edt(
                ~lethal, return_distances=False, return_indices=True
            )
            rows, cols = np.indices(lethal.shape)
            d2 = (rows - idx[0]) ** 2 + (cols - idx[1]) ** 2
            rc = robot_radius / metric.resolution
            inflation = np.zeros_like(static)
            inflation[d2 <= rc * rc] = INSCRIBED
            band = (d2 > rc * rc) & (d2 < 4.0 * rc * rc)
            if band.any():
                d = np.sqrt(d2[band].astype(np.float64))
                inflation[band] = np.rint(200.0 * (2.0 * rc - d) / rc).astype(np.int16)
            static = np.maximum(static, inflation)

        self.static = static
        self.dynamic: dict[tuple[int, int], int] = {}  # cell -> expiry tick

    # -- cost queries --

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def composite(self, col: int, row: int) -> int:
        if (col, row) in self.dynamic:
            return LETHAL
        return int(self.static[row, col])

    def traversable(self, col: int, row: int) -> bool:
        return self.in_bounds(col, row) and self.composite(col, row) < UNKNOWN_COST

    def cell_of(self, p: Point2) -> tuple[int, int]:
        return (
            int(math.floor((p.x - self.origin.x) / self.resolution)),
            int(math.floor((p.y - self.origin.y) / self.resolution)),
        )

    def center_of(self, col: int, row: int) -> Point2:
        return Point2(
            self.origin.x + (col + 0.5) * self.resolution,
            self.origin.y + (row + 0.5) * self.resolution,
        )

    def cell_index(self, cell: tuple[int, int]) -> int:
        return cell[1] * self.width + cell[0]

    # -- dynamic layer --

    def update_dynamic_layer(self, scan, pose: Pose2, tick: int) -> set[tuple[int, int]]:
        """Fold a lidar scan into the dynamic layer and age out old entries.

        Every hit lands as cost 254 with expiry tick + ttl unless the cell is
        already static-lethal. Returns the cells whose composite cost differs
        from before the call.
        """
        affected: dict[tuple[int, int], int] = {}

        expired = [cell for cell, expiry in self.dynamic.items() if tick >= expiry]
        for cell in expired:
            affected.setdefault(cell, self.composite(*cell))
            del self.dynamic[cell]

        for angle, dist in zip(scan.angles, scan.ranges):
            if dist >= scan.range_max - 1e-9:
                continue
            heading = pose.heading + angle
            hit = Point2(
                pose.x + dist * math.cos(heading), pose.y + dist * math.sin(heading)
            )
            cell = self.cell_of(hit)
            if not self.in_bounds(*cell):
                continue
            if self.static[cell[1], cell[0]] == LETHAL:
                continue
            affected.setdefault(cell, self.composite(*cell))
            self.dynamic[cell] = tick + self.ttl

        return {
            cell for cell, before in affected.items() if self.composite(*cell) != before
        }


def edge_cost(dmap: DrivingMap, u: tuple[int, int], v: tuple[int, int]) -> int | None:
    """Cost bucket of the move u→v (the destination's composite), or None if
    the move is invalid: either endpoint blocked, or a diagonal squeezing
    past a blocked cardinal cell."""
    if not dmap.traversable(*u) or not dmap.traversable(*v):
        return None
    dc, dr = v[0] - u[0], v[1] - u[1]
    if dc != 0 and dr != 0:
        if not dmap.traversable(u[0] + dc, u[1]) or not dmap.traversable(u[0], u[1] + dr):
            return None
    return dmap.composite(*v)


def _neighbors(dmap: DrivingMap, cell: tuple[int, int]):
    col, row = cell
    for dc, dr in _OFFSETS:
        v = (col + dc, row + dr)
        if not dmap.in_bounds(*v):
            continue
        c = edge_cost(dmap, cell, v)
        if c is not None:
            yield v, c, dc != 0 and dr != 0


def path_cost(dmap: DrivingMap, path: list[tuple[int, int]]) -> ExactCost:
    """Canonical cost of a cell path on the current composite costmap."""
    total = ZERO
    for u, v in zip(path, path[1:]):
        c = edge_cost(dmap, u, v)
        if c is None:
            return INFINITE
        total = total.step(c, u[0] != v[0] and u[1] != v[1])
    return total


def plan_global(
    dmap: DrivingMap, start: tuple[int, int], goal: tuple[int, int]
) -> tuple[list[tuple[int, int]], ExactCost] | None:
    """A* over the composite costmap; None when the goal is unreachable.

    Ties pop in (f, h, row-major index) order, so identical inputs give an
    identical cell sequence, not merely an identical cost.
    """
    if not dmap.traversable(*start) or not dmap.traversable(*goal):
        return None
    g: dict[tuple[int, int], ExactCost] = {start: ZERO}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    h0 = octile(start, goal)
    heap: list[tuple[ExactCost, ExactCost, int, tuple[int, int]]] = [
        (h0, h0, dmap.cell_index(start), start)
    ]
    while heap:
        _, _, _, cell = heapq.heappop(heap)
        if cell in closed:
            continue
        closed.add(cell)
        if cell == goal:
            path = [cell]
            while cell != start:
                cell = parent[cell]
                path.append(cell)
            path.reverse()
            return path, g[goal]
        g_cur = g[cell]
        for nxt, cost, diagonal in _neighbors(dmap, cell):
            if nxt in closed:
                continue
            ng = g_cur.step(cost, diagonal)
            incumbent = g.get(nxt)
            if incumbent is None or ng < incumbent:
                g[nxt] = ng
                parent[nxt] = cell
                h = octile(nxt, goal)
                heapq.heappush(heap, (ng.plus(h), h, dmap.cell_index(nxt), nxt))
    return None


class ReplanState:
    """Incremental lifelong search bookkeeping (D*-Lite style).

    The search runs backward from the goal, so per-cell g values estimate
    remaining cost-to-goal and survive robot movement; km compensates the
    heuristic as the start slides. After each repair the extracted path
    cost equals a from-scratch plan on the same costmap.
    """

    def __init__(self, dmap: DrivingMap, start: tuple[int, int], goal: tuple[int, int]):
        if not dmap.in_bounds(*start) or not dmap.in_bounds(*goal):
            raise ValueError("start and goal must lie inside the map")
        self.dmap = dmap
        self.start = start
        self.goal = goal
        self.km = ZERO
        self._last_start = start
        self.g: dict[tuple[int, int], ExactCost] = {}
        self.rhs: dict[tuple[int, int], ExactCost] = {goal: ZERO}
        self._heap: list[tuple[ExactCost, ExactCost, int, tuple[int, int]]] = []
        self._key_of: dict[tuple[int, int], tuple[ExactCost, ExactCost]] = {}
        self._push(goal, self._calc_key(goal))
        self._compute()

    # -- queue helpers --

    def _calc_key(self, cell: tuple[int, int]) -> tuple[ExactCost, ExactCost]:
        m = self.g.get(cell, INFINITE)
        r = self.rhs.get(cell, INFINITE)
        if r < m:
            m = r
        if m.is_inf:
            return (INFINITE, INFINITE)
        return (m.plus(octile(self.start, cell)).plus(self.km), m)

    def _push(self, cell: tuple[int, int], key: tuple[ExactCost, ExactCost]) -> None:
        self._key_of[cell] = key
        heapq.heappush(self._heap, (key[0], key[1], self.dmap.cell_index(cell), cell))

    def _peek(self) -> tuple[tuple[ExactCost, ExactCost], tuple[int, int]] | None:
        while self._heap:
            k1, k2, _, cell = self._heap[0]
            current = self._key_of.get(cell)
            if current is not None and current == (k1, k2):
                return (k1, k2), cell
            heapq.heappop(self._heap)  # stale or removed entry
        return None

    def _update_vertex(self, cell: tuple[int, int]) -> None:
        if cell != self.goal:
            best = INFINITE
            for nxt, cost, diagonal in _neighbors(self.dmap, cell):
                cand = self.g.get(nxt, INFINITE).step(cost, diagonal)
                if cand < best:
                    best = cand
            self.rhs[cell] = best
        self._key_of.pop(cell, None)
        if self.g.get(cell, INFINITE) != self.rhs.get(cell, INFINITE):
            self._push(cell, self._calc_key(cell))

    def _compute(self) -> None:
        while True:
            g_start = self.g.get(self.start, INFINITE)
            rhs_start = self.rhs.get(self.start, INFINITE)
            top = self._peek()
            if top is None:
                break
            key, cell = top
            start_key = self._calc_key(self.start)
            if not (key < start_key or rhs_start != g_start):
                break
            heapq.heappop(self._heap)
            self._key_of.pop(cell, None)
            fresh = self._calc_key(cell)
            if key < fresh:
                self._push(cell, fresh)
                continue
            if self.g.get(cell, INFINITE) > self.rhs.get(cell, INFINITE):
                self.g[cell] = self.rhs.get(cell, INFINITE)
                for nxt, _, _ in _neighbors(self.dmap, cell):
                    self._update_vertex(nxt)
            else:
                self.g[cell] = INFINITE
                self._update_vertex(cell)
                for nxt, _, _ in _neighbors(self.dmap, cell):
                    self._update_vertex(nxt)

    def extract_path(self) -> list[tuple[int, int]] | None:
        if not self.dmap.traversable(*self.start):
            return None
        if self.rhs.get(self.start, INFINITE).is_inf:
            return None
        path = [self.start]
        cell = self.start
        limit = self.dmap.width * self.dmap.height
        while cell != self.goal:
            best = None
            best_key: tuple[ExactCost, int] | None = None
            for nxt, cost, diagonal in _neighbors(self.dmap, cell):
                g_next = self.g.get(nxt, INFINITE)
                if g_next.is_inf:
                    continue
                through = g_next.step(cost, diagonal)
                key = (through, self.dmap.cell_index(nxt))
                if best_key is None or key[0] < best_key[0] or (
                    key[0] == best_key[0] and key[1] < best_key[1]
                ):
                    best = nxt
                    best_key = key
            if best is None or len(path) > limit:
                return None
            cell = best
            path.append(cell)
        return path


def replan_incremental(
    rs: ReplanState,
    changed_cells: set[tuple[int, int]],
    new_start: tuple[int, int] | None = None,
) -> list[tuple[int, int]] | None:
    """Repair the search after costmap changes (and optionally a moved
    start), then extract the current optimal path."""
    if new_start is not None and new_start != rs.start:
        if not rs.dmap.in_bounds(*new_start):
            raise ValueError("new start must lie inside the map")
        rs.km = rs.km.plus(octile(rs._last_start, new_start))
        rs._last_start = new_start
        rs.start = new_start
    for cell in changed_cells:
        if not rs.dmap.in_bounds(*cell):
            continue
        rs._update_vertex(cell)
        for dc, dr in _OFFSETS:
            nxt = (cell[0] + dc, cell[1] + dr)
            if rs.dmap.in_bounds(*nxt):
                rs._update_vertex(nxt)
    rs._compute()
    return rs.extract_path()


# -- waypoint following --

@dataclass
class RobotState:
    pose: Pose2
    v: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class FollowResult:
    command: tuple[float, float]  # (v, omega)
    new_state: RobotState
    reached: bool


def cells_to_points(dmap: DrivingMap, path: list[tuple[int, int]]) -> list[Point2]:
    return [dmap.center_of(*cell) for cell in path]


def follow_step(
    state: RobotState,
    waypoints: list[Point2],
    dt: float,
    *,
    v_max: float = 1.0,
    omega_max: float = 1.5,
    lookahead: float = 0.5,
    goal_tol: float = 0.15,
    turn_gain: float = 3.0,
) -> FollowResult:
    """Rotate-then-drive pursuit of the furthest waypoint within lookahead.

    Large heading error (> 90°) turns in place; otherwise forward speed
    scales with the cosine of the error. The returned new_state is the pure
    kinematic propagation of the command; collision response is the
    simulator's job.
    """
    if not waypoints:
        raise ValueError("follow_step needs at least one waypoint")
    pose = state.pose
    here = pose.position
    if here.distance_to(waypoints[-1]) <= goal_tol:
        return FollowResult((0.0, 0.0), RobotState(pose, 0.0, 0.0), True)

    nearest = min(
        range(len(waypoints)), key=lambda i: (here.distance_to(waypoints[i]), i)
    )
    target = waypoints[nearest]
    for i in range(nearest, len(waypoints)):
        if here.distance_to(waypoints[i]) <= lookahead:
            target = waypoints[i]

    err = normalize_angle(math.atan2(target.y - here.y, target.x - here.x) - pose.heading)
    if abs(err) <= math.pi / 2:
        v = v_max * max(0.0, math.cos(err))
    else:
        v = 0.0
    omega = max(-omega_max, min(omega_max, turn_gain * err))

    new_pose = Pose2(
        pose.x + v * math.cos(pose.heading) * dt,
        pose.y + v * math.sin(pose.heading) * dt,
        normalize_angle(pose.heading + omega * dt),
    )
    return FollowResult((v, omega), RobotState(new_pose, v, omega), False)


# -- exports --

def costmap_to_pgm(dmap: DrivingMap) -> bytes:
    """Composite costmap in the same P5 convention as the metric layer:
    lethal 0, unknown 128, otherwise brightness falling with cost."""
    values = np.empty((dmap.height, dmap.width), dtype=np.uint8)
    for row in range(dmap.height):
        for col in range(dmap.width):
            c = dmap.composite(col, row)
            if c >= LETHAL:
                values[row, col] = 0
            elif c == UNKNOWN_COST:
                values[row, col] = 128
            else:
                values[row, col] = 255 - c
    header = f"P5\n{dmap.width} {dmap.height}\n255\n".encode("ascii")
    return header + np.flipud(values).tobytes()


def path_to_csv(dmap: DrivingMap, path: list[tuple[int, int]]) -> str:
    lines = ["index,col,row,x,y"]
    for i, cell in enumerate(path):
        p = dmap.center_of(*cell)
        lines.append(f"{i},{cell[0]},{cell[1]},{p.x:.9f},{p.y:.9f}")
    return "\n".join(lines) + "\n"
