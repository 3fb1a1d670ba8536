"""Command-line entry point.

Every command that writes files also writes ``<output>.manifest.json``
holding the argument vector, working directory, seed, cutoff, shot count,
output paths with SHA-256 digests, package version and wall-clock duration.
``photonchip rerun`` replays a manifest and checks the digests.

Exit codes: 0 success, 1 runtime or statistical failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from contextlib import contextmanager
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .applications import (
    DEMO_ORBITS,
    GraphInput,
    VibronicInput,
    feature_vector,
    franck_condon_profile,
    graph_demo_chip,
    graph_to_job,
    permute_graph,
    vibronic_to_job,
)
from .device import ChipSpec, JobSpec, exact_pattern_distribution, load_json, sample
from .errors import CutoffError, FitError, OutOfModelError, UndefinedStatisticError, ValidationError
from .nonclassicality import chip_params_to_test_model, passes_test
from .statistics import SweepResult, g2, interference_sweep, nrf, orbit_histogram_sixphoton, orbit_probability

DATA_ENV = "PHOTONCHIP_DATA"
EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2


class UsageError(ValidationError):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------


def resolve_input(name) -> Path:
    """Existing path, else a file under ``$PHOTONCHIP_DATA``, else a bundled data file."""
    p = Path(name)
    if p.exists():
        return p.resolve()
    env = os.environ.get(DATA_ENV)
    if env and (Path(env) / p).exists():
        return (Path(env) / p).resolve()
    bundled = resources.files("photonchip.data") / str(p)
    if bundled.is_file():
        return Path(str(bundled))
    raise ValidationError(f"input file not found: {name}")


def write_samples(samples: np.ndarray, path) -> None:
    Path(path).write_text(format_samples(samples), encoding="utf-8")


def format_samples(samples: np.ndarray) -> str:
    return "".join(" ".join(map(str, row)) + "\n" for row in np.asarray(samples).tolist())


def read_samples(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rows.append([int(v) for v in line.split()])
            except ValueError:
                raise ValidationError(f"{path}:{k}: not a photon-number pattern") from None
    if not rows:
        return np.zeros((0, 8), dtype=np.int64)
    if len({len(r) for r in rows}) != 1:
        raise ValidationError(f"{path}: patterns have inconsistent lengths")
    out = np.array(rows, dtype=np.int64)
    if np.any(out < 0):
        raise ValidationError(f"{path}: negative photon counts")
    return out


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _commit(files: dict[Path, str]) -> None:
    """Write every file through a temporary sibling so no partial output survives an error."""
    staged = []
    try:
        for path, text in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.remove(tmp)
        raise


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _label(orbit) -> str:
    return "[" + " ".join(map(str, orbit)) + "]"


def parse_orbits(text: str) -> list[tuple[int, ...]]:
    """``"1,1,1;1,1,1,1;2,1,1,1"`` -> orbit tuples (non-increasing positive counts)."""
    out = []
    for part in text.split(";"):
        try:
            orbit = tuple(int(v) for v in part.replace(" ", "").split(",") if v)
        except ValueError:
            raise UsageError(f"cannot parse orbit {part!r}") from None
        if not orbit or any(v <= 0 for v in orbit) or list(orbit) != sorted(orbit, reverse=True):
            raise UsageError(f"orbit {part!r} must be non-increasing positive counts")
        out.append(orbit)
    return out


# ---------------------------------------------------------------------------
# commands; each returns ({path: text}, manifest extras)
# ---------------------------------------------------------------------------


def _chip(path: Optional[str], default: Optional[ChipSpec] = None) -> tuple[ChipSpec, list[str]]:
    if path is None:
        return (default or ChipSpec.default()), []
    p = resolve_input(path)
    try:
        return ChipSpec.from_dict(load_json(p)), [str(p)]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{p}: malformed chip spec ({exc})") from None


def _job(path: str, **overrides) -> tuple[JobSpec, str]:
    p = resolve_input(path)
    d = load_json(p)
    try:
        d.update({k: v for k, v in overrides.items() if v is not None})
        return JobSpec.from_dict(d), str(p)
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValidationError(f"{p}: malformed job spec ({exc})") from None


def cmd_sample(a):
    chip, inputs = _chip(a.chip)
    job, jp = _job(a.job, shots=a.shots, seed=a.seed)
    batch = sample(chip, job, workers=a.workers)
    meta = dict(inputs=inputs + [jp], seed=job.seed, cutoff=job.total_cutoff, shots=job.shots)
    return {Path(a.out): format_samples(batch)}, meta


def cmd_stats(a):
    chosen = [a.nrf is not None, a.g2 is not None, a.orbits, a.total_photons]
    if sum(chosen) != 1:
        raise UsageError("choose exactly one of --nrf, --g2, --orbits, --total-photons")
    p = resolve_input(a.samples)
    batch = read_samples(p)
    M = batch.shape[1]
    for m in (a.nrf or []) + ([a.g2] if a.g2 is not None else []):
        if not 0 <= m < M:
            raise UsageError(f"mode {m} outside 0..{M - 1}")
    if a.nrf is not None:
        value, err = nrf(batch, *a.nrf)
        text = csv_text(["mode_a", "mode_b", "nrf", "stderr"], [(a.nrf[0], a.nrf[1], value, err)])
    elif a.g2 is not None:
        value, err = g2(batch, a.g2)
        text = csv_text(["mode", "g2", "stderr"], [(a.g2, value, err)])
    elif a.orbits:
        n = max(len(batch), 1)
        rows = [
            (_label(o), _label(pat), prob, math.sqrt(prob * (1 - prob) / n))
            for o, pat, prob in orbit_histogram_sixphoton(batch, M)
        ]
        text = csv_text(["orbit", "pattern", "probability", "stderr"], rows)
    else:
        totals = batch.sum(axis=1)
        counts = np.bincount(totals) if len(totals) else np.zeros(1, dtype=np.int64)
        text = csv_text(["n", "count", "fraction"], [(n, c, c / max(len(batch), 1)) for n, c in enumerate(counts)])
    return {Path(a.out): text} if a.out else text, dict(inputs=[str(p)], shots=len(batch))


def cmd_interference(a):
    if a.pair[0] == a.pair[1] or not all(0 <= k < 4 for k in a.pair):
        raise UsageError(f"--pair needs two distinct squeezer indices in 0..3, got {a.pair}")
    if a.n_phis < 4:
        raise UsageError("--n-phis must be at least 4")
    chip, inputs = _chip(a.chip)
    phis = np.linspace(0, math.pi, a.n_phis, endpoint=False)
    res: SweepResult = interference_sweep(
        chip, tuple(a.pair), phis, a.shots, seed=a.seed, cutoff=a.cutoff, workers=a.workers
    )
    names = SweepResult.TRACE_NAMES
    header = ["phi", *names, *(n + "_stderr" for n in names)]
    rows = [[phi, *res.traces[:, i], *res.stderrs[:, i]] for i, phi in enumerate(res.phis)]
    fit = {
        k: float(fmt(getattr(res, k)))
        for k in ("n", "eta", "phi0", "n_err", "eta_err", "phi0_err")
    }
    fit["pair"] = list(a.pair)
    out = Path(a.out)
    files = {out: csv_text(header, rows), out.with_suffix(".fit.json"): json.dumps(fit, indent=2, sort_keys=True) + "\n"}
    return files, dict(inputs=inputs, seed=a.seed, cutoff=a.cutoff, shots=a.shots)


def cmd_nonclassicality(a):
    chip, inputs = _chip(a.chip)
    report = passes_test(chip_params_to_test_model(chip), a.epsilon)
    text = report.to_json() + "\n"
    return ({Path(a.out): text} if a.out else text), dict(inputs=inputs)


def cmd_vibronic(a):
    if (a.shots is None) == (not a.exact):
        raise UsageError("choose exactly one of --exact and --shots")
    mp = resolve_input(a.molecule)
    try:
        inp = VibronicInput.from_dict(load_json(mp))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{mp}: {exc}") from None
    chip, inputs = _chip(a.chip)
    job = vibronic_to_job(inp, shots=a.shots or 0, seed=a.seed, total_cutoff=a.cutoff)
    prof = franck_condon_profile(chip, job, inp, bin_width=a.bin, gamma=a.gamma, exact=a.exact, workers=a.workers)
    out = Path(a.out)
    files = {
        out: csv_text(["wavenumber", "mass"], prof.bins),
        out.with_suffix(".broadened.csv"): csv_text(["wavenumber", "intensity"], prof.broadened),
    }
    return files, dict(inputs=inputs + [str(mp)], seed=a.seed, cutoff=a.cutoff, shots=a.shots)


def cmd_graph(a):
    if (a.shots is None) == (not a.exact):
        raise UsageError("choose exactly one of --exact and --shots")
    orbits = parse_orbits(a.orbits) if a.orbits else list(DEMO_ORBITS)
    chip, inputs = _chip(a.chip, graph_demo_chip())
    graphs = []
    for g in a.graphs:
        gp = resolve_input(g)
        graphs.append((Path(g).stem, GraphInput.from_dict(load_json(gp))))
        inputs.append(str(gp))
    perms = [("id", None)]
    if a.perms:
        pp = resolve_input(a.perms)
        perms += sorted(load_json(pp).items())
        inputs.append(str(pp))
    # validate every encoding before any computation
    jobs = []
    for name, g in graphs:
        for pname, perm in perms:
            gg = g if perm is None else permute_graph(g, perm)
            jobs.append((name, pname, graph_to_job(gg, shots=a.shots or 0, seed=a.seed, total_cutoff=a.cutoff)))
    header = ["graph", "permutation"] + [_label(o) for o in orbits]
    if not a.exact:
        header += [_label(o) + "_stderr" for o in orbits]
    rows = []
    for name, pname, job in jobs:
        if a.exact:
            rows.append([name, pname, *feature_vector(exact_pattern_distribution(chip, job), orbits)])
        else:
            batch = sample(chip, job, workers=a.workers)
            vals = [orbit_probability(batch, o) for o in orbits]
            rows.append([name, pname] + [v for v, _ in vals] + [e for _, e in vals])
    return {Path(a.out): csv_text(header, rows)}, dict(inputs=inputs, seed=a.seed, cutoff=a.cutoff, shots=a.shots)


def cmd_rerun(a):
    mp = resolve_input(a.manifest)
    man = load_json(mp)
    try:
        argv, cwd, expected = man["argv"], man["cwd"], man["outputs"]
    except KeyError as exc:
        raise ValidationError(f"{mp}: manifest missing field {exc}") from None
    with _chdir(cwd):
        args = build_parser().parse_args(argv)
        if args.command == "rerun":
            raise UsageError("a manifest cannot replay another rerun")
        files, _ = args.func(args)
        if isinstance(files, str):
            raise UsageError("manifest refers to a stdout-only run")
        digests = {str(p.resolve()): _digest(t) for p, t in files.items()}
        if a.write:
            _commit(files)
    bad = [p for p, h in expected.items() if digests.get(p) != h]
    if bad:
        print("rerun mismatch: " + ", ".join(bad), file=sys.stderr)
        return None, EXIT_RUNTIME
    print(f"rerun reproduced {len(expected)} output(s) byte-for-byte")
    return None, EXIT_OK


@contextmanager
def _chdir(path):
    old = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(old)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p, cutoff=8):
    p.add_argument("--chip", help="chip spec JSON (default: bundled default chip)")
    p.add_argument("--cutoff", type=int, default=cutoff, help="total photon cutoff")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1, help="sampling threads")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="photonchip", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw photon-number samples for a job")
    p.add_argument("--chip")
    p.add_argument("--job", required=True, help="job spec JSON")
    p.add_argument("--shots", type=int, help="override the job's shot count")
    p.add_argument("--seed", type=int, help="override the job's seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("stats", help="statistics of a sample file")
    p.add_argument("samples")
    p.add_argument("--nrf", type=int, nargs=2, metavar=("A", "B"))
    p.add_argument("--g2", type=int, metavar="M")
    p.add_argument("--orbits", action="store_true", help="six-photon orbit histogram")
    p.add_argument("--total-photons", action="store_true")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("interference", help="two-squeezer phase sweep and fit")
    _add_common(p, cutoff=10)
    p.add_argument("--pair", type=int, nargs=2, required=True, metavar=("K", "L"))
    p.add_argument("--n-phis", type=int, default=40)
    p.add_argument("--shots", type=int, default=400_000)
    p.add_argument("--out", required=True, help="trace CSV; the fit goes to <out>.fit.json")
    p.set_defaults(func=cmd_interference)

    p = sub.add_parser("nonclassicality", help="classical-simulability test")
    p.add_argument("--chip")
    p.add_argument("--epsilon", type=float, default=0.10)
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.set_defaults(func=cmd_nonclassicality)

    p = sub.add_parser("vibronic", help="Franck-Condon profile")
    p.add_argument("molecule", help="molecule JSON (omega, omega_prime, duschinsky, r)")
    _add_common(p)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true")
    mode.add_argument("--shots", type=int)
    p.add_argument("--bin", type=float, default=100.0, help="bin width in cm^-1")
    p.add_argument("--gamma", type=float, default=100.0, help="Lorentzian half-width in cm^-1")
    p.add_argument("--out", required=True, help="binned CSV; smoothing goes to <out>.broadened.csv")
    p.set_defaults(func=cmd_vibronic)

    p = sub.add_parser("graph", help="graph feature vectors")
    p.add_argument("graphs", nargs="+", help="graph JSON files")
    _add_common(p)
    p.add_argument("--perms", help="JSON object of named one-line permutations")
    p.add_argument("--orbits", help='orbits as "1,1,1;1,1,1,1;2,1,1,1"')
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true")
    mode.add_argument("--shots", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("rerun", help="replay a manifest and verify its outputs")
    p.add_argument("manifest")
    p.add_argument("--write", action="store_true", help="also overwrite the recorded outputs")
    p.set_defaults(func=cmd_rerun)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        files, meta = args.func(args)
        if args.command == "rerun":
            return meta
        if isinstance(files, str):
            sys.stdout.write(files)
            return EXIT_OK
        outputs = {str(p.resolve()): _digest(t) for p, t in files.items()}
        first = next(iter(files))
        manifest = {
            "command": args.command,
            "argv": argv,
            "cwd": os.getcwd(),
            "inputs": meta.get("inputs", []),
            "seed": meta.get("seed"),
            "cutoff": meta.get("cutoff"),
            "shots": meta.get("shots"),
            "outputs": outputs,
            "version": __version__,
            "duration_s": round(time.perf_counter() - start, 3),
        }
        files[first.with_name(first.name + ".manifest.json")] = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        _commit(files)
    except (CutoffError, FitError, OutOfModelError, UndefinedStatisticError) as exc:
        print(f"photonchip {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except UsageError as exc:
        print(f"photonchip {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        print(f"photonchip {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RuntimeError as exc:
        print(f"photonchip {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
