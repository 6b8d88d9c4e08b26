"""Information bottleneck solvers."""
