"""Energy-variation measurement protocols, their consistency checks and the trapped-ion example."""
