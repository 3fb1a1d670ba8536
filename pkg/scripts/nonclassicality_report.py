"""Classical-simulability test of a chip over a range of error tolerances."""

import argparse

import numpy as np

from photonchip.device import ChipSpec, load_json
from photonchip.nonclassicality import chip_params_to_test_model, passes_test


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--chip", help="chip spec JSON (default: bundled default chip)")
    a = ap.parse_args()
    chip = ChipSpec.from_dict(load_json(a.chip)) if a.chip else ChipSpec.default()
    params = chip_params_to_test_model(chip)
    for eps in np.round(np.linspace(0.05, 0.4, 8), 3):
        rep = passes_test(params, float(eps))
        print(f"eps {eps:.3f}: lhs {rep.lhs:.5f} vs {rep.rhs:.5f} -> {'non-classical' if rep.passed else 'classical'}")
    print(f"threshold eps0 = {rep.epsilon0:.4f}")


if __name__ == "__main__":
    main()
