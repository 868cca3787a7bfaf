"""The mixture's score is exact: check it against finite differences.

Every sampler and detector result downstream rests on true_score being
the gradient of log p_t.  This script differentiates the log density
numerically at a handful of pixels and prints the agreement, then shows
the score-noise duality that the eps parameterization uses.
"""

import numpy as np

from artifact import (alpha_bar_at, default_model, eps_from_score, log_density,
                      make_schedule, score_from_eps, true_score)


def main():
    sched = make_schedule()
    model = default_model()
    rng = np.random.default_rng(7)
    t = 480
    abar = alpha_bar_at(sched, t)
    x = np.sqrt(abar) * model.templates[0] + np.sqrt(1 - abar) * \
        rng.standard_normal(model.image_shape)

    s = true_score(model, sched, x, t)
    h = 1e-5
    print(f"central differences of log p_t at t = {t} (h = {h:g}):")
    print(f"{'pixel':>10} {'analytic':>14} {'numeric':>14} {'rel err':>10}")
    for _ in range(6):
        c, i, j = 0, rng.integers(16), rng.integers(16)
        xp, xm = x.copy(), x.copy()
        xp[c, i, j] += h
        xm[c, i, j] -= h
        fd = (log_density(model, sched, xp, t) - log_density(model, sched, xm, t)) / (2 * h)
        rel = abs(fd - s[c, i, j]) / abs(s[c, i, j])
        print(f"({c},{i:>2},{j:>2})   {s[c, i, j]:>14.8f} {fd:>14.8f} {rel:>10.2e}")

    eps = eps_from_score(s, sched, t)
    back = score_from_eps(eps, sched, t)
    print(f"\nscore -> eps -> score round trip, max abs err: "
          f"{np.max(np.abs(back - s)):.2e}")
    print(f"noise-prediction magnitude at t={t}: rms(eps) = "
          f"{np.sqrt(np.mean(eps ** 2)):.4f} (unit-ish when x is on-process)")


if __name__ == "__main__":
    main()
