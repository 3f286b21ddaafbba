from .logger import get_logger, setup_logger, LogCapture, log_exception
from .rng import derive_rng, derive_seed

__all__ = ['get_logger', 'setup_logger', 'LogCapture', 'log_exception',
           'derive_rng', 'derive_seed']
