"""Reading configurations and writing results."""
