#!/usr/bin/env python3
"""Classify the spectrum regime of a configuration and print the evidence.

Example:
    python scripts/spectrum_report.py --preset fig3a --depth 4
    python scripts/spectrum_report.py --base const:2 --probs pgeo:c=0.25,gamma=0.5
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from stochadd.cli import PRESETS  # noqa: E402
from stochadd.julia import FiberedSystem  # noqa: E402
from stochadd.numeration import parse_base_spec, parse_probs_spec  # noqa: E402
from stochadd.spectrum import classify_spectrum  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset")
    ap.add_argument("--base")
    ap.add_argument("--probs")
    ap.add_argument("--depth", type=int, default=4)
    ap.add_argument("--resolution", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if args.preset:
        base_spec, probs_spec = PRESETS[args.preset]
    elif args.base and args.probs:
        base_spec, probs_spec = args.base, args.probs
    else:
        ap.error("need --preset or both --base and --probs")

    sysm = FiberedSystem(parse_base_spec(base_spec), parse_probs_spec(probs_spec))
    rep = classify_spectrum(sysm, args.depth, resolution=args.resolution,
                            seed=args.seed)
    print(f"base={base_spec}")
    print(f"probs={probs_spec}")
    print(f"regime={rep.regime}")
    print(f"claimed_spectrum={rep.claimed_spectrum}")
    eig = rep.evidence["eigenpairs"]
    print(f"eigen_max_residual={eig.max_residual:.17g}")
    print(f"eigen_states={eig.n_states}")
    print(f"boundary_sup_min_dist={rep.evidence['boundary_sup_min_dist']:.17g}")
    print(f"boundary_coverage={rep.evidence['boundary_coverage']:.17g}")
    trep = rep.evidence.get("transient_limits")
    if trep is not None:
        print(f"transient_interior_max={trep.interior_max_mod:.17g}")
        print(f"transient_boundary_min={trep.boundary_min_mod:.17g}")
        print(f"transient_boundary_max={trep.boundary_max_mod:.17g}")
    print(f"ok={str(rep.ok).lower()}")
    return 0 if rep.ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
