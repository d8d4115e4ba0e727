"""Task I/O, checkpoints, benchmark drivers and the command-line interface."""
