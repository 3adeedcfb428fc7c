"""Show the ordering hazard check on the shipped configurations."""

from pubsub_rv.battery import case_study_config, hazard_example_config
from pubsub_rv.config import validate_ordering_safety

for name, cfg in [("case_study", case_study_config()), ("hazard_example", hazard_example_config())]:
    hazards = validate_ordering_safety(cfg)
    print(f"{name}: {len(hazards)} hazard(s)")
    for hazard in hazards:
        print(f"  {hazard}")
