"""Deterministic 2D swarm simulator for the four command behaviors.

Fifty unit drones move on a bounded arena with synchronous straight-line
kinematics toward behavior-specific targets: Hovering holds the initial
hex-grid anchors, Splitting divides the swarm into two hex-packed groups
d_split apart along x, Dispersing sends every drone to a distinct seeded
random arena point, and Aggregating packs the swarm onto a hex disc of
radius r_aggregate about the current centroid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from swarmbci.recording import EVENT_NAMES

BEHAVIORS = ("Hovering", "Splitting", "Dispersing", "Aggregating")

#: Convergence threshold: every drone within this distance of its target.
CONVERGENCE_TOL_M = 1e-3


@dataclass(frozen=True)
class SwarmConfig:
    n_drones: int = 50
    arena: tuple[float, float, float, float] = (0.0, 100.0, 0.0, 100.0)  # xmin,xmax,ymin,ymax
    max_speed: float = 1.0  # meters per step
    min_separation: float = 1.0
    r_aggregate: float = 5.0
    d_split: float = 30.0
    max_steps: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.n_drones < 2:
            raise ValueError("n_drones must be >= 2")
        xmin, xmax, ymin, ymax = self.arena
        if not (xmin < xmax and ymin < ymax):
            raise ValueError("arena bounds must be nonempty")
        if self.max_speed <= 0:
            raise ValueError("max_speed must be > 0")
        if not (self.d_split > 2 * self.r_aggregate):
            raise ValueError("d_split must exceed 2 * r_aggregate")
        if not (0 < self.min_separation < self.r_aggregate):
            raise ValueError("min_separation must be in (0, r_aggregate)")

    @property
    def center(self) -> np.ndarray:
        xmin, xmax, ymin, ymax = self.arena
        return np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])


@dataclass(frozen=True)
class SwarmState:
    positions: np.ndarray  # n x 2
    anchors: np.ndarray    # hover reference (initial grid)
    targets: np.ndarray    # behavior-specific goals
    behavior: str
    step_count: int = 0

    @property
    def n_drones(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class SwarmMetrics:
    mean_centroid_dist: float
    mean_nn_dist: float
    cluster_count: int
    cluster_gap: float

    def to_dict(self) -> dict:
        return {
            "mean_centroid_dist": float(self.mean_centroid_dist),
            "mean_nn_dist": float(self.mean_nn_dist),
            "cluster_count": int(self.cluster_count),
            "cluster_gap": float(self.cluster_gap),
        }


def behavior_name(code: int) -> str:
    if code not in EVENT_NAMES:
        raise ValueError(f"invalid behavior code {code}, expected one of {sorted(EVENT_NAMES)}")
    return EVENT_NAMES[code]


def hex_spiral(n: int, spacing: float) -> np.ndarray:
    """First ``n`` points of a hexagonal-lattice spiral around the origin.

    Ring 0 is the origin; ring k holds 6k points walked in a fixed
    direction order, so the sequence is deterministic.
    """
    # Axial-coordinate unit steps of the six hex directions.
    directions = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]
    axial = [(0, 0)]
    k = 1
    while len(axial) < n:
        q, r = k * directions[4][0], k * directions[4][1]  # ring start
        for dq, dr in directions:
            for _ in range(k):
                axial.append((q, r))
                q, r = q + dq, r + dr
        k += 1
    axial = np.asarray(axial[:n], dtype=np.float64)
    x = spacing * (axial[:, 0] + 0.5 * axial[:, 1])
    y = spacing * (np.sqrt(3.0) / 2.0) * axial[:, 1]
    return np.column_stack([x, y])


def _hex_rings_needed(n: int) -> int:
    """Smallest ring count K with 1 + 3K(K+1) >= n."""
    k = 0
    while 1 + 3 * k * (k + 1) < n:
        k += 1
    return k


def _packed_disc(n: int, radius: float, min_separation: float) -> np.ndarray:
    """Hex-packed slots for ``n`` drones within ``radius`` of the origin."""
    k = max(_hex_rings_needed(n), 1)
    spacing = radius / k
    if spacing < min_separation:
        raise ValueError(
            f"cannot pack {n} drones in radius {radius} without violating "
            f"min_separation {min_separation}"
        )
    return hex_spiral(n, spacing)


def _assign_slots(positions: np.ndarray, slots: np.ndarray) -> np.ndarray:
    """Greedy deterministic matching: each slot takes the nearest free drone.

    Returns per-drone targets. O(n^2), fine for swarm sizes here.
    """
    n = positions.shape[0]
    targets = np.empty_like(positions)
    free = list(range(n))
    for slot in slots:
        d = np.linalg.norm(positions[free] - slot, axis=1)
        pick = free.pop(int(np.argmin(d)))  # argmin ties break to lowest index
        targets[pick] = slot
    return targets


def _check_in_arena(points: np.ndarray, cfg: SwarmConfig, what: str) -> None:
    xmin, xmax, ymin, ymax = cfg.arena
    if (np.any(points[:, 0] < xmin) or np.any(points[:, 0] > xmax)
            or np.any(points[:, 1] < ymin) or np.any(points[:, 1] > ymax)):
        raise ValueError(f"{what} fall outside the arena; enlarge arena or reduce spacing")


def init_swarm(cfg: SwarmConfig) -> SwarmState:
    """Place drones on a centered hexagonal grid, hovering at their anchors."""
    spacing = max(2.0 * cfg.min_separation, cfg.r_aggregate / 2.0)
    pts = hex_spiral(cfg.n_drones, spacing)
    pts = pts - pts.mean(axis=0) + cfg.center
    _check_in_arena(pts, cfg, "initial positions")
    return SwarmState(pts, pts.copy(), pts.copy(), "Hovering", 0)


def set_behavior(state: SwarmState, behavior: str, cfg: SwarmConfig,
                 seed: int = 0) -> SwarmState:
    """Assign per-drone targets for ``behavior`` and reset the step counter."""
    if behavior not in BEHAVIORS:
        raise ValueError(f"unknown behavior {behavior!r}, expected one of {BEHAVIORS}")
    pos = state.positions
    n = state.n_drones

    if behavior == "Hovering":
        targets = state.anchors.copy()
    elif behavior == "Splitting":
        centroid = pos.mean(axis=0)
        # Sort by x (ties by y, then index); lower half goes left.
        order = np.lexsort((np.arange(n), pos[:, 1], pos[:, 0]))
        n_low = (n + 1) // 2
        targets = np.empty_like(pos)
        offset = np.array([cfg.d_split / 2.0, 0.0])
        for group, center in ((order[:n_low], centroid - offset),
                              (order[n_low:], centroid + offset)):
            slots = _packed_disc(len(group), cfg.r_aggregate, cfg.min_separation)
            slots = slots - slots.mean(axis=0) + center
            targets[group] = _assign_slots(pos[group], slots)
        _check_in_arena(targets, cfg, "splitting targets")
    elif behavior == "Dispersing":
        rng = np.random.default_rng(seed)
        xmin, xmax, ymin, ymax = cfg.arena
        chosen: list[np.ndarray] = []
        attempts = 0
        limit = 10 * n * n
        while len(chosen) < n:
            attempts += 1
            if attempts > limit:
                raise ValueError("arena too crowded: dispersing target sampling failed")
            p = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
            if all(np.linalg.norm(p - q) >= 2.0 * cfg.min_separation for q in chosen):
                chosen.append(p)
        targets = _assign_slots(pos, np.asarray(chosen))
    else:  # Aggregating
        centroid = pos.mean(axis=0)
        slots = _packed_disc(n, cfg.r_aggregate, cfg.min_separation)
        slots = slots - slots.mean(axis=0) + centroid
        _check_in_arena(slots, cfg, "aggregation targets")
        targets = _assign_slots(pos, slots)

    return SwarmState(pos.copy(), state.anchors.copy(), targets, behavior, 0)


def step(state: SwarmState, cfg: SwarmConfig) -> SwarmState:
    """One synchronous kinematic step.

    Each drone moves toward its target by min(max_speed, distance), then
    any pair closer than min_separation is pushed apart symmetrically by
    half the overlap (coincident pairs separate along +x, lower index
    moving -x). All corrections are computed from the same post-move
    snapshot, so drone update order is irrelevant. Positions clamp to
    the arena.
    """
    delta = state.targets - state.positions
    dist = np.linalg.norm(delta, axis=1)
    scale = np.where(dist > 0, np.minimum(cfg.max_speed, dist) / np.maximum(dist, 1e-300), 0.0)
    moved = state.positions + delta * scale[:, None]

    diff = moved[None, :, :] - moved[:, None, :]
    pair_dist = np.linalg.norm(diff, axis=2)
    correction = np.zeros_like(moved)
    ii, jj = np.where(np.triu(pair_dist < cfg.min_separation, k=1))
    for i, j in zip(ii, jj):
        d = pair_dist[i, j]
        if d > 0:
            direction = diff[i, j] / d
        else:
            direction = np.array([1.0, 0.0])  # coincident pair: split along +x
        push = 0.5 * (cfg.min_separation - d)
        correction[i] -= direction * push
        correction[j] += direction * push
    moved = moved + correction

    xmin, xmax, ymin, ymax = cfg.arena
    moved[:, 0] = np.clip(moved[:, 0], xmin, xmax)
    moved[:, 1] = np.clip(moved[:, 1], ymin, ymax)
    return replace(state, positions=moved, step_count=state.step_count + 1)


def converged(state: SwarmState) -> bool:
    return bool(np.max(np.linalg.norm(state.positions - state.targets, axis=1))
                <= CONVERGENCE_TOL_M)


def run_until_converged(state: SwarmState, cfg: SwarmConfig
                        ) -> tuple[SwarmState, list[np.ndarray], int]:
    """Step until every drone reaches its target or max_steps elapse.

    Returns (final state, trajectory snapshots incl. the start, steps
    taken). Non-convergence is reported by steps == max_steps, not
    raised.
    """
    trajectory = [state.positions.copy()]
    steps = 0
    while not converged(state) and steps < cfg.max_steps:
        state = step(state, cfg)
        trajectory.append(state.positions.copy())
        steps += 1
    return state, trajectory, steps


def _clusters_single_linkage(points: np.ndarray, cut: float) -> list[np.ndarray]:
    """Connected components of the pairwise graph with edges <= cut."""
    n = points.shape[0]
    dist = np.linalg.norm(points[None, :, :] - points[:, None, :], axis=2)
    adj = dist <= cut
    unvisited = set(range(n))
    clusters = []
    while unvisited:
        seed_idx = min(unvisited)
        frontier = [seed_idx]
        unvisited.discard(seed_idx)
        members = [seed_idx]
        while frontier:
            i = frontier.pop()
            neighbors = [j for j in list(unvisited) if adj[i, j]]
            for j in neighbors:
                unvisited.discard(j)
                members.append(j)
                frontier.append(j)
        clusters.append(np.asarray(sorted(members)))
    return clusters


def metrics(state: SwarmState, cfg: SwarmConfig) -> SwarmMetrics:
    """Geometry summary: centroid spread, nearest-neighbor spacing, clusters.

    Clusters are single-linkage components at cut distance
    4 * min_separation; cluster_gap is the distance between the two
    largest clusters' centroids (0 if fewer than 2 clusters).
    """
    pos = state.positions
    centroid = pos.mean(axis=0)
    mean_centroid_dist = float(np.mean(np.linalg.norm(pos - centroid, axis=1)))

    dist = np.linalg.norm(pos[None, :, :] - pos[:, None, :], axis=2)
    np.fill_diagonal(dist, np.inf)
    mean_nn_dist = float(np.mean(np.min(dist, axis=1)))

    clusters = _clusters_single_linkage(pos, 4.0 * cfg.min_separation)
    if len(clusters) >= 2:
        big = sorted(clusters, key=lambda c: (-len(c), c[0]))[:2]
        gap = float(np.linalg.norm(pos[big[0]].mean(axis=0) - pos[big[1]].mean(axis=0)))
    else:
        gap = 0.0
    return SwarmMetrics(mean_centroid_dist, mean_nn_dist, len(clusters), gap)


def grid_positions(state: SwarmState) -> np.ndarray:
    """Integer-cell view of the positions (display parity with grid maps)."""
    return np.rint(state.positions).astype(int)


def save_trajectory_csv(trajectory: list[np.ndarray], path) -> None:
    """Write snapshots as CSV rows: step,drone_id,x,y."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,drone_id,x,y\n")
        for t, snap in enumerate(trajectory):
            for i, (x, y) in enumerate(snap):
                fh.write(f"{t},{i},{x!r},{y!r}\n")
