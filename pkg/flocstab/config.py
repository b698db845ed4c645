"""
Configuration management for flocstab

Centralizes environment variable loading and validation of the
numerical defaults used when a run configuration leaves them out.
"""

import os
from dotenv import load_dotenv
from .validation import (
    validate_grid_size, validate_count, validate_positive, validate_log_level,
    ValidationError,
)
from .logging_config import logger, set_log_level

load_dotenv()


class Config:
    """flocstab defaults from environment variables"""

    def __init__(self):
        """Initialize configuration from environment"""
        self.log_level = self._read('FLOCSTAB_LOG_LEVEL', 'INFO', validate_log_level)
        self.grid = self._read('FLOCSTAB_GRID', '200',
                               lambda v, name: validate_grid_size(int(v), name, min_cells=16))
        self.jobs = self._read('FLOCSTAB_JOBS', '1',
                               lambda v, name: validate_count(int(v), name, max_value=512))
        self.tol = self._read('FLOCSTAB_TOL', '1e-10',
                              lambda v, name: validate_positive(float(v), name))
        self.max_iter = self._read('FLOCSTAB_MAX_ITER', '10000',
                                   lambda v, name: validate_count(int(v), name))
        self.output_dir = os.getenv('FLOCSTAB_OUTPUT_DIR', 'results')
        logger.debug(f"FLOCSTAB_OUTPUT_DIR: {self.output_dir}")

    @staticmethod
    def _read(name: str, default: str, validator):
        raw = os.getenv(name, default)
        try:
            value = validator(raw, name)
        except (ValidationError, ValueError) as e:
            logger.error(f"Invalid {name} in environment: {e}")
            raise ValueError(f"Invalid {name}: {e}") from e
        logger.debug(f"{name}: {value}")
        return value

    def as_defaults(self) -> dict:
        """Defaults merged under a run configuration document"""
        return {
            'grid': self.grid,
            'jobs': self.jobs,
            'output_dir': self.output_dir,
            'solver': {'tol': self.tol, 'max_iter': self.max_iter},
        }

    def __repr__(self) -> str:
        return (
            f"Config(\n"
            f"  log_level={self.log_level},\n"
            f"  grid={self.grid},\n"
            f"  jobs={self.jobs},\n"
            f"  tol={self.tol},\n"
            f"  max_iter={self.max_iter},\n"
            f"  output_dir={self.output_dir}\n"
            f")"
        )


config = Config()
set_log_level(config.log_level)
