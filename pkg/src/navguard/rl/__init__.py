"""TD3 and expert-regularized TD3 for waypoint navigation."""
