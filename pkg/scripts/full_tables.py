"""Opt-in full Monte-Carlo replication: every DGP and error regime at B = 2000.

Runs the ``simulate`` command once per (dgp, error) cell and writes each cell
to ``<out>/dgp<k>_<error>/``.  Expect many hours on a single core; use
``--jobs`` to spread replicates over processes.
"""

import argparse
import sys

from linfsynth.cli import main as cli_main


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="full_tables")
    p.add_argument("--b", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--full-grid", action="store_true",
                   help="100 x 11 tuning grid with 10 folds instead of the reduced grid")
    p.add_argument("--errors", default="iid,ar1,arma11")
    p.add_argument("--dgps", default="1,2,3,4")
    args = p.parse_args(argv)
    for err in args.errors.split(","):
        for dgp in args.dgps.split(","):
            cmd = ["simulate", "--dgp", dgp, "--error", err, "--b", str(args.b),
                   "--seed", str(args.seed), "--jobs", str(args.jobs),
                   "--out", f"{args.out}/dgp{dgp}_{err}"]
            if args.full_grid:
                cmd.append("--full-grid")
            code = cli_main(cmd)
            if code:
                return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
