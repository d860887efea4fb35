"""Simulation core: scenario geometry, channels, STAR-RIS protocols, MEC energy model, MDP environment and CLI."""
