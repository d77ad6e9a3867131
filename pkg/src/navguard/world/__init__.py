"""Deterministic 2D world: occupancy maps, differential-drive robot, social-force pedestrians."""

from navguard.world.grid import (MapFormatError, OccupancyMap, load_map, nearest_occupied,
                                 parse_map, raycast_grid, walled_room)
from navguard.world.scenario import (InvalidScenario, Scenario, load_scenario, parse_scenario,
                                     reset_episode)
from navguard.world.sim import (distance_to_nearest_obstacle, integrate_arc, social_forces,
                                step_pedestrians, step_robot)
from navguard.world.state import (Pedestrian, Pose, RobotConfig, SocialForceParams, Twist,
                                  WorldState, normalize_angle)

__all__ = [
    "InvalidScenario", "MapFormatError", "OccupancyMap", "Pedestrian", "Pose", "RobotConfig",
    "Scenario", "SocialForceParams", "Twist", "WorldState", "distance_to_nearest_obstacle",
    "integrate_arc", "load_map", "load_scenario", "nearest_occupied", "normalize_angle",
    "parse_map", "parse_scenario", "raycast_grid", "reset_episode", "social_forces",
    "step_pedestrians", "step_robot", "walled_room",
]
