from .generators import (
    EggWorldParams,
    EllipticalWorldParams,
    generate_egg_world,
    generate_elliptical_world,
    random_rotation,
    sample_start_positions,
)
from .campaign import (
    CampaignAggregates,
    CampaignResult,
    ClearanceComparison,
    DeviationSweep,
    RunKey,
    RunResult,
    SignTest,
    compare_clearance,
    k_sweep,
    paired_sign_test,
    run_campaign,
    run_seed,
    start_seed,
)

__all__ = [
    "EggWorldParams",
    "EllipticalWorldParams",
    "generate_egg_world",
    "generate_elliptical_world",
    "random_rotation",
    "sample_start_positions",
    "CampaignAggregates",
    "CampaignResult",
    "ClearanceComparison",
    "DeviationSweep",
    "RunKey",
    "RunResult",
    "SignTest",
    "compare_clearance",
    "k_sweep",
    "paired_sign_test",
    "run_campaign",
    "run_seed",
    "start_seed",
]
