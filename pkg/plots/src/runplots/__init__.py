from .render import PANELS, MissingColumnError, load_csv, render

__all__ = ["PANELS", "MissingColumnError", "load_csv", "render"]
__version__ = "0.1.0"
