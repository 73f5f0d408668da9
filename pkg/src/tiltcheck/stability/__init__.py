"""Second-order tilt-stability analysis at a reference point."""
