"""
Deterministic rate against simulation
=====================================

Build the reference deployment at desk scale (16 elements per surface),
then compare the large-system rate with a seeded Monte-Carlo average.
"""

import math

from doubleris import TransmitCovariance, PhaseConfig, asymptotic_rate, ergodic_rate_mc
from doubleris.scenario import parse_scenario_text

scenario = parse_scenario_text("").at_desk_scale()
print(f"M={scenario.dims.M} N={scenario.dims.N} L={scenario.dims.L1}")

# zero phases and isotropic input, the unoptimised baseline
for snr in (-10.0, 0.0, 10.0, 20.0):
    link = scenario.link(snr)
    Q = TransmitCovariance.isotropic(scenario.dims.M, link.power)
    phases = PhaseConfig.zeros(scenario.dims.L1, scenario.dims.L2)
    asym = asymptotic_rate(link.profile, Q, phases, link.noise)
    mc = ergodic_rate_mc(link.profile, Q, phases, link.noise, trials=500, seed=1, workers=4)
    print(f"{snr:6.1f} dB  asymptotic {asym / math.log(2):7.3f}  "
          f"simulated {mc.mean / math.log(2):7.3f} +- {mc.stderr / math.log(2):.3f} bits")

# the same check as a report
from doubleris import run_validate
for line in run_validate(scenario, trials=300, threads=4).lines():
    print(line)
