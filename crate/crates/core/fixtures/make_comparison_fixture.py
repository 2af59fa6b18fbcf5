"""Synthesize the simulation/experiment fixture pair for the 16 Hz, 72 deg cell.

The published experimental grids are not available, so both files are
synthetic: a smooth simulated duty surface, and an "experiment" built from it
with a gain, an offset and a fixed pseudo-random residual orthogonal to the
simulation, scaled so the pair has RMSE 0.59 cm/s and PCC 0.80.
"""

import math
import random

FREQ, PHASE = 16.0, 72.0
DUTIES = [round(0.1 * i, 1) for i in range(10)]
TARGET_RMSE, TARGET_PCC, GAIN = 0.59, 0.80, 0.85
MASS, G, SLOPE = 0.0445, 9.8, 0.5111


def sim_surface(dl, dr):
    # leftward drive wins near high D_L, rightward near high D_R
    return 2.4 * dl * (1.2 - dl) - 1.1 * dr * (1.1 - dr) + 0.35 * dl * dr


cells = [(dl, dr) for dl in DUTIES for dr in DUTIES]
sim = [sim_surface(dl, dr) for dl, dr in cells]
n = len(sim)
mean_s = sum(sim) / n
sc = [s - mean_s for s in sim]
var_s = sum(x * x for x in sc) / n

rng = random.Random(20240527)
noise = [rng.gauss(0.0, 1.0) for _ in cells]
mn = sum(noise) / n
noise = [x - mn for x in noise]
proj = sum(a * b for a, b in zip(noise, sc)) / sum(x * x for x in sc)
noise = [a - proj * b for a, b in zip(noise, sc)]
var_n = sum(x * x for x in noise) / n

# PCC = GAIN*sd_s / sqrt(GAIN^2 var_s + var_r)
var_r = GAIN * GAIN * var_s * (1.0 / TARGET_PCC ** 2 - 1.0)
resid = [x * math.sqrt(var_r / var_n) for x in noise]
spread = (GAIN - 1.0) ** 2 * var_s + var_r
offset = math.sqrt(TARGET_RMSE ** 2 - spread)
exp = [mean_s + offset + GAIN * a + r for a, r in zip(sc, resid)]

sim = [round(v, 4) for v in sim]
exp = [round(v, 4) for v in exp]


def sig6(x):
    if x == 0:
        return "0"
    e = math.floor(math.log10(abs(x)))
    return f"{x:.{max(0, 5 - e)}f}"


with open("comparison_sim.csv", "w") as f:
    f.write("# SYNTHESIZED fixture, not measured data; see make_comparison_fixture.py\n")
    f.write("freq_hz,phase_deg,duty_left,duty_right,battery_pos,velocity_mps,power_w,eff_cmspw,cot,failed\n")
    for (dl, dr), v in zip(cells, sim):
        p = SLOPE * (dl + dr)
        vm = v / 100.0
        eff = sig6(100 * abs(vm) / p) if p > 0 else ""
        cot = sig6(p / (MASS * G * abs(vm))) if vm != 0 else ""
        f.write(f"{sig6(FREQ)},{sig6(PHASE)},{sig6(dl)},{sig6(dr)},P1,{sig6(vm)},{sig6(p)},{eff},{cot},0\n")

with open("comparison_exp.csv", "w") as f:
    f.write("# SYNTHESIZED fixture, not measured data; see make_comparison_fixture.py\n")
    f.write("# stands in for the published top-row comparison at 16 Hz, 72 deg\n")
    f.write("freq_hz,phase_deg,duty_left,duty_right,velocity_cms\n")
    for (dl, dr), v in zip(cells, exp):
        f.write(f"{sig6(FREQ)},{sig6(PHASE)},{sig6(dl)},{sig6(dr)},{v}\n")

rmse = math.sqrt(sum((a - b) ** 2 for a, b in zip(sim, exp)) / n)
ma, mb = sum(sim) / n, sum(exp) / n
cov = sum((a - ma) * (b - mb) for a, b in zip(sim, exp))
pcc = cov / math.sqrt(sum((a - ma) ** 2 for a in sim) * sum((b - mb) ** 2 for b in exp))
print(f"rmse={rmse:.5f} pcc={pcc:.5f}")
