"""Block counts of Ewens-Pitman random partitions when theta grows linearly
with the sample size: simulation, exact moments, limiting Gaussian
covariance and the compensated martingale behind it."""
from .errors import (
    AccuracyError,
    CancellationWarning,
    ConfigurationError,
    DomainError,
    ResourceError,
    StateError,
)
from .partition import (
    FixedTheta,
    LinearTheta,
    ModelParams,
    PartitionCounts,
    SeedSpec,
    simulate,
)

__version__ = "0.1.0"
