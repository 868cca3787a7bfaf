"""When is correction still worth it?  Sweep the correction fraction.

For each fraction of total time the correction step slides later; the
detection window keeps its configured start until the correction point
catches up, then slides with it at constant width (the CLI's sweep-tc
applies the same rule).  Escape rate is the fraction of runs whose trap
region healed back onto a template.
"""

import numpy as np

from artifact import (CorrectionConfig, DetectorConfig, TrapSpec, TrappedOracle,
                      default_model, grid_step_at_fraction, make_grid,
                      make_schedule, region_escaped, run_corrected)

FRACTIONS = (0.2, 0.3, 0.4, 0.48, 0.6, 0.8)
BASE_TD, BASE_TC = 0.8, 0.48
N_SAMPLES = 4


def main():
    sched = make_schedule()
    model = default_model()
    grid = make_grid(sched, 25)
    spec = TrapSpec(region=(4, 5, 7, 7), trigger_step=680, spike_gain=8.0)
    truth = spec.mask(*model.image_shape[1:])

    print(f"trap triggers at t = {spec.trigger_step} "
          f"({spec.trigger_step / sched.t_total:.2f} of T); "
          f"{N_SAMPLES} samples per fraction\n")
    print(f"{'fraction':>9} {'t_correct':>10} {'escape rate':>12}")
    rates = []
    for frac in FRACTIONS:
        td = BASE_TD if frac < BASE_TD else min(0.98, frac + (BASE_TD - BASE_TC))
        det = DetectorConfig(
            t_detect_start=grid_step_at_fraction(grid, td, sched.t_total),
            t_correct=grid_step_at_fraction(grid, frac, sched.t_total))
        escapes = []
        for sample in range(N_SAMPLES):
            res = run_corrected(TrappedOracle(model, sched, [spec]), sched,
                                grid, 7, det, CorrectionConfig(method="ttc"),
                                sample=sample)
            escapes.append(region_escaped(res.final, truth, model))
        rate = float(np.mean(escapes))
        rates.append(rate)
        print(f"{frac:>9.2f} {det.t_correct:>10} {rate:>12.2f}")

    best = max(rates)
    knee = max(f for f, r in zip(FRACTIONS, rates) if r == best)
    print(f"\nbest escape rate {best:.2f}; latest fraction attaining it: {knee:.2f}")
    print("corrections before the trap fires find nothing to fix, and very "
          "late ones leave too few refinement steps to heal the region.")


if __name__ == "__main__":
    main()
