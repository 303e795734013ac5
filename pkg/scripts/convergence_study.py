"""Energy drift of the coupled evolve scenario as the time step is refined.

Usage: python3 scripts/convergence_study.py [configs/evolve.toml] [--levels 4] [--out drift.csv]
"""

import argparse

import numpy as np

from dualfield import scenarios
from dualfield.config import load_config
from dualfield.io import write_csv


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config", nargs="?", default="configs/evolve.toml")
    p.add_argument("--levels", type=int, default=4, help="number of dt halvings")
    p.add_argument("--out", default=None, help="optional CSV path")
    args = p.parse_args(argv)

    cfg = load_config(args.config)
    it = cfg.integrator
    basis = scenarios.build_basis(cfg)
    profile = scenarios.build_profile(cfg)
    rng = np.random.default_rng(cfg.scenario.seed)
    c = rng.standard_normal((basis.n_modes, 2)) + 1j * rng.standard_normal((basis.n_modes, 2))
    state = scenarios.evolve_state(cfg, basis, profile, c)
    dt0 = it.dt if it.dt > 0 else scenarios.fastest_period(state) / it.steps_per_period
    t_end = dt0 * it.n_steps

    rows, prev = [], None
    for level in range(args.levels):
        dt = dt0 / 2**level
        n = int(round(t_end / dt))
        _, drift = scenarios.energy_run(state, dt, n, max(1, n // 1000))
        ratio = prev / drift if prev else float("nan")
        rows.append((dt, n, drift, ratio))
        print(f"dt={dt:.5g}  steps={n:6d}  drift={drift:.3e}  ratio={ratio:.3f}")
        prev = drift
    if args.out:
        write_csv(args.out, ["dt", "n_steps", "relative_drift", "ratio_to_previous"], rows)


if __name__ == "__main__":
    main()
