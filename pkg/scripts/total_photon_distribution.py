"""Distribution of the total detected photon number with all squeezers on.

Evaluated from the total-photon generating function of each Schmidt state,
convolved with the Poisson detector noise, so high photon numbers are cheap.
Optionally compared with a sampled histogram at a moderate cutoff.
"""

import argparse
from pathlib import Path

import numpy as np
from scipy.stats import poisson

from photonchip import data
from photonchip.cli import csv_text
from photonchip.device import ChipSpec, JobSpec, build_schmidt_states, load_json, sample
from photonchip.gaussian import total_photon_pmf


def total_photons(chip: ChipSpec, job: JobSpec, nmax: int) -> np.ndarray:
    s1, s2 = build_schmidt_states(chip, job)
    p = np.convolve(total_photon_pmf(s1, nmax), total_photon_pmf(s2, nmax))[: nmax + 1]
    noise = poisson.pmf(np.arange(nmax + 1), sum(chip.noise_nbar))
    return np.convolve(p, noise)[: nmax + 1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--chip", help="chip spec JSON (default: bundled default chip)")
    ap.add_argument("--unitary", default="U1", help="bundled benchmark unitary or 'I'")
    ap.add_argument("--nmax", type=int, default=24)
    ap.add_argument("--shots", type=int, default=0, help="also sample this many shots at cutoff 8")
    ap.add_argument("--out", default="results/total_photons.csv")
    a = ap.parse_args()
    chip = ChipSpec.from_dict(load_json(a.chip)) if a.chip else ChipSpec.default()
    U = np.eye(4) if a.unitary == "I" else data.unitary(a.unitary)
    job = JobSpec(unitary=U, shots=a.shots, total_cutoff=8)
    p = total_photons(chip, job, a.nmax)
    header, rows = ["n", "probability"], [[n, q] for n, q in enumerate(p)]
    if a.shots:
        counts = np.bincount(sample(chip, job).sum(axis=1), minlength=a.nmax + 1)[: a.nmax + 1]
        header.append("sampled_fraction")
        for row, c in zip(rows, counts):
            row.append(c / a.shots)
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(csv_text(header, rows))
    print(f"mean total photons {np.dot(np.arange(a.nmax + 1), p):.3f}; "
          f"P(N >= 15) = {max(0.0, 1 - p[:15].sum()):.3e}; written to {out}")


if __name__ == "__main__":
    main()
