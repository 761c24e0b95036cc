"""Contact-free route assignment for agents moving through a grid of nodes."""
