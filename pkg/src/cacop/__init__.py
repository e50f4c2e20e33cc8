"""Pass planning for robot soccer: feasible kick/receiver search and learned scoring."""
