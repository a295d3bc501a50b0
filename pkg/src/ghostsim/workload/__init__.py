from .checkpoint import (Estimate, FeedbackParams, FeedbackResult, checkpoint_feedback_iterate,
                         monte_carlo_non_atomic, pr_non_atomic)
from .retry import (BACKOFF, IMMEDIATE, ClientModel, HysteresisResult, ServiceModel, Shedding,
                    StormResult, Trigger, conservation_residuals, hysteresis_experiment,
                    retry_fixed_point, run_retry_storm)

__all__ = [
    "Estimate", "FeedbackParams", "FeedbackResult", "checkpoint_feedback_iterate",
    "monte_carlo_non_atomic", "pr_non_atomic", "BACKOFF", "IMMEDIATE", "ClientModel",
    "HysteresisResult", "ServiceModel", "Shedding", "StormResult", "Trigger",
    "conservation_residuals", "hysteresis_experiment", "retry_fixed_point", "run_retry_storm",
]
