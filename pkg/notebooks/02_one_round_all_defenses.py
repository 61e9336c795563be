# %%
"""
One federated round under attack
================================

Ten clients train one local epoch on the synthetic task. Three of them add
Gaussian noise to their parameters. Every defense looks at the same updates.
"""

from asmr_fl.attacks import AttackSpec
from asmr_fl.config import DEFAULT_ANA_SIGMA
from asmr_fl.fedsim import generate_task, init_state, make_defense, run_round

task = generate_task(seed=0)
attack = AttackSpec("ana", {1, 4, 7}, ana_sigma=DEFAULT_ANA_SIGMA)

# %%
for name in ("none", "asmr", "mkrum", "dnc", "cfl"):
    state = init_state(task, 10, attack, seed=0)
    rec = run_round(state, make_defense(name, f=3), attack, round=1, seed=0)
    print(f"{name:>6}: excluded {sorted(rec.verdict.excluded)}  accuracy {rec.accuracy:.3f}")
