"""
Utility modules for the fractal projection lab.

Configuration, logging, seed splitting and terminal rendering.
"""

from utils.logging_config import setup_logging
from utils.config import load_config, save_config, get_default_config
