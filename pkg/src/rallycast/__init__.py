"""Rallycast: movement forecasting for turn-based racket sports.

The package turns stroke-by-stroke rally records into player-movement
graphs, trains an encoder-decoder graph model over them, and serves
step-ahead forecasts of shot types and landing positions through a CLI
and a small HTTP service.
"""

__version__ = "0.1.0"
