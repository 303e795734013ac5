"""Kramers-Kronig residual against the half-width of the frequency band.

Shows where band truncation stops dominating the residual for the medium in a
config.  Usage: python3 scripts/kk_scan.py [configs/kk.toml] [--step 0.01]
"""

import argparse

from dualfield import medium, oracles, scenarios
from dualfield.config import load_config

WIDTHS = (1.5, 2.5, 4.0, 8.0, 15.0, 30.0, 60.0)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config", nargs="?", default="configs/kk.toml")
    p.add_argument("--step", type=float, default=0.01)
    args = p.parse_args(argv)

    cfg = load_config(args.config)
    profile = scenarios.build_profile(cfg)
    m = cfg.medium
    for band in WIDTHS:
        grid = medium.symmetric_grid(band, args.step)
        if m.form == "lorentzian":
            vals = oracles.lorentzian_permittivity(grid, m.sigma0, m.omega0, m.gamma)
            perm = medium.Permittivity(grid, vals[None])
        else:
            perm = medium.permittivity_pv_grid(profile, grid)
        rep = medium.kk_report(perm)
        print(f"band={band:6.1f}  residual={rep.residual:.3e}  edge={rep.edge_fraction:.3e}  "
              f"truncation_dominated={rep.truncation_dominated}")


if __name__ == "__main__":
    main()
