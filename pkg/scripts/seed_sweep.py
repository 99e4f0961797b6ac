"""Sweep master_seed for a fault scenario and report, per seed, the sign of
the final cost-gap integral and the detection delay of the faulty agent.

    python scripts/seed_sweep.py [scenario.yaml] [n_seeds]
"""

import math
import sys
from pathlib import Path

from inspect_fdi.config import load_scenario
from inspect_fdi.sim import predict_nominal, run_scenario

ROOT = Path(__file__).resolve().parent.parent


def main(path=ROOT / "scenarios" / "state_fault.yaml", n_seeds=8):
    cfg = load_scenario(path)
    (fault,) = cfg.faults
    prediction = predict_nominal(cfg)  # independent of the seed
    below = 0
    for seed in range(int(n_seeds)):
        log = run_scenario(cfg.replace(master_seed=seed), prediction)
        integral = log.cost[-1][3]
        below += integral < 0
        flags = [t for t in log.flagged_ticks(fault.target_agent) if t >= fault.onset_time]
        delay = (math.ceil((flags[0] - fault.onset_time) / cfg.fdi_window - 1e-9)
                 if flags else None)
        others = sum(len(log.flagged_ticks(a)) for a in cfg.agent_ids
                     if a != fault.target_agent)
        print(f"seed {seed}: integral {integral:+.4g}  delay {delay} ticks  "
              f"false flags {others}")
    print(f"H below nominal on {below}/{n_seeds} seeds")


if __name__ == "__main__":
    main(*sys.argv[1:])
