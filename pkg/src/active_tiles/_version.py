import importlib.metadata

version = importlib.metadata.version('active_tiles')
