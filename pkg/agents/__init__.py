"""Learning agents: numpy networks, prioritized replay and soft actor-critic."""
