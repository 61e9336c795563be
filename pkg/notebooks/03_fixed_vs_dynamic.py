# %%
"""
Fixed versus dynamic malfunction counts
=======================================

Multi-Krum and DnC are told to drop three clients per round. That is exactly
right in the fixed regime (three attackers every round) and wrong in the
dynamic one (four designated clients, each active with probability 0.75).
ASMR picks the count itself. The table mirrors TPR / FPR / final accuracy.
"""

from asmr_fl.config import CALIBRATED_SFA_CONSTANT, ExperimentConfig
from asmr_fl.harness import run_sweep

base = ExperimentConfig(sfa_constant=CALIBRATED_SFA_CONSTANT)


def fmt(x):
    return "  -  " if x is None else f"{x:.3f}"


# %%
print(f"{'':>6} {'regime':>8} {'attack':>10}   TPR    FPR    Acc")
for regime, seeds in (("fixed", range(10)), ("dynamic", range(5))):
    for attack in ("ana", "sfa"):
        for defense in ("dnc", "cfl", "mkrum", "asmr"):
            cfg = base.replace(attack=attack, defense=defense, regime=regime, seeds=tuple(seeds))
            s = run_sweep(cfg)[1]
            print(f"{defense:>6} {regime:>8} {attack:>10}  {fmt(s['tpr'])}  {fmt(s['fpr'])}  "
                  f"{fmt(s['final_accuracy'])}")
