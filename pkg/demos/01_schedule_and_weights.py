"""Walk the noise schedule: signal retention, SNR, and the temporal weight.

The linear-beta variance-preserving schedule fixes everything else in the
package: step grids are subsets of its timesteps, detection thresholds are
computed on weighted scores, and the DDIM update is algebra over alpha_bar.
"""

import numpy as np

from artifact import (alpha_bar_at, grid_step_at_fraction, make_grid,
                      make_schedule, snr, temporal_weight)


def main():
    sched = make_schedule()
    print(f"linear beta schedule, T = {sched.t_total}")
    print(f"{'t':>6} {'alpha_bar':>12} {'w(t)':>10} {'SNR':>12}")
    for t in (1000, 800, 600, 480, 400, 200, 40, 1):
        print(f"{t:>6} {alpha_bar_at(sched, t):>12.6f} "
              f"{temporal_weight(sched, t):>10.4f} {snr(sched, t):>12.5g}")

    # w(t)^2 * SNR(t) telescopes back to 1 - alpha_bar; the detector's
    # scale reasoning leans on this identity.
    ts = np.arange(1, sched.t_total + 1)
    abars = np.array([alpha_bar_at(sched, int(t)) for t in ts])
    lhs = np.array([temporal_weight(sched, int(t)) ** 2 * snr(sched, int(t))
                    for t in ts])
    print(f"\nmax |w^2 snr - (1 - alpha_bar)| over all t: "
          f"{np.max(np.abs(lhs - (1.0 - abars))):.2e}")

    grid = make_grid(sched, 25)
    print(f"\n25-step grid: {[int(t) for t in grid.timesteps]}")
    for frac in (0.8, 0.48, 0.9):
        step = grid_step_at_fraction(grid, frac, sched.t_total)
        print(f"fraction {frac:.2f} of T resolves to grid step {step}"
              + ("  (midpoint tie goes to the larger t)" if frac == 0.9 else ""))


if __name__ == "__main__":
    main()
