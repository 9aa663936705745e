"""
Stage package for panelspectra
Contains the base stage class, the stage registry and the pipeline stages
"""

from .base_stage import BaseStage, StageContext
from .stage_system import StageMetadata, StageManager, get_stage_manager, register_stage

__all__ = ['BaseStage', 'StageContext', 'StageMetadata', 'StageManager', 'get_stage_manager', 'register_stage']
