"""Non-destructive probing of qubit-cat states in a cavity via mode invisibility."""

__version__ = '0.3.0'
