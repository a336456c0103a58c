from .map_grid import GridSpec, InsertOutcome, MapGrid, cell_index, load_snapshot, relaxed_thresholds

__all__ = ["GridSpec", "InsertOutcome", "MapGrid", "cell_index", "load_snapshot", "relaxed_thresholds"]
