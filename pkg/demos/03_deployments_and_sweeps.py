"""
Deployments and geometry sweeps
===============================
"""

from dataclasses import replace

from doubleris import SweepSpec, run_benchmarks, run_sweep
from doubleris.scenario import parse_scenario_text

scenario = parse_scenario_text("").at_desk_scale()

# five deployments, zero phases, 20 dB
table = run_benchmarks(scenario, 20.0)
for line in table.lines():
    print(line)

# spacing and size, averaged over random phase draws
avg = replace(scenario, phases="random", phase_draws=10)
for axis, values in (("element_spacing", (0.5, 0.25, 0.125)), ("element_count", (16, 36, 64))):
    print(axis)
    for rec in run_sweep(avg, SweepSpec(axis, values, snr_db=20.0), threads=4):
        print(f"  {rec.value:g}: {rec.rate_bits:.3f} bits")
