# %%
"""
Calibrating attack strength
===========================

Attack parameters are tuned on the attack-free task rather than fixed:
noise until the undefended model loses 20-30% of its accuracy, label
corruption until a solo model loses at least 30%, and the sign-flip constant
until a single flipping client drags the undefended model to chance level.
"""

import logging

from asmr_fl.calibration import calibrate_all
from asmr_fl.config import ExperimentConfig

logging.basicConfig(level=logging.DEBUG, format="%(message)s")
logging.getLogger("asmr_fl.asmr").setLevel(logging.ERROR)

# %%
result = calibrate_all(ExperimentConfig())
for attack, values in result.items():
    print(attack, {k: round(v, 4) for k, v in values.items()})
