"""Command-line entry point.

    python -m src.cli run    [--config FILE] [--device SPEC] [--seed N] [--out DIR] [--jobs N]
                             [--acquisition ei|mpi|lcb] [--beta B] [--resume]
    python -m src.cli score  IMAGE [--count-max N] [--marker-frac F] [--min-area PX]
    python -m src.cli report STATE [--out DIR] [--threshold T]

Exit codes: 0 success, 2 usage/config, 3 device, 4 I/O. Failures print one
`error=<Class> key=value ... message="..."` line on stderr.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from config.config import config
from config.experiment import default_experiment_file, load_experiment_file
from src.core.analysis import DEFAULT_THRESHOLD, write_report
from src.core.imaging import load_image
from src.core.loop import run_experiment
from src.core.space import denormalize
from src.core.state import ExperimentState, load_state
from src.core.vision import SegOpts, score
from src.devices.registry import create_device, default_space
from src.utils.errors import ConfigError, DropletBoError, IoError
from src.utils.logger import get_logger, log_error, set_console_target
from src.utils.validators import validate_acquisition_name, validate_jobs

logger = get_logger(__name__)

STATE_FILE = "state.json"
REPORT_FILE = "report.json"
ANALYSIS_DIR = "analysis"
EXIT_INTERNAL = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droplet-bo",
        description="Closed-loop Bayesian optimization of droplet generation",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run (or resume) an optimization experiment")
    run.add_argument("--config", type=Path, help="Experiment TOML file")
    run.add_argument("--device", help="inkjet-sim, microfluidic-sim or files:<dir>")
    run.add_argument("--seed", type=int, default=0, help="Root random seed")
    run.add_argument("--out", type=Path, help="Output directory (default: <DATA_DIR>/run)")
    run.add_argument("--jobs", type=int, default=config.DEFAULT_JOBS, help="Worker threads")
    run.add_argument("--acquisition", help="ei, mpi or lcb (overrides the file)")
    run.add_argument("--beta", type=float, help="LCB exploration weight (overrides the file)")
    run.add_argument("--resume", action="store_true", help="Continue from <out>/state.json")
    run.add_argument("--quiet", action="store_true", help="No progress bar")

    sc = commands.add_parser("score", help="Score one droplet image")
    sc.add_argument("image", type=Path)
    sc.add_argument("--count-max", type=int, default=50)
    sc.add_argument("--marker-frac", type=float, default=0.4)
    sc.add_argument("--min-area", type=int, default=20)

    rep = commands.add_parser("report", help="Write analysis artifacts for a saved state")
    rep.add_argument("state", type=Path)
    rep.add_argument("--out", type=Path, help="Output directory (default: next to the state)")
    rep.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    return parser


# Artifacts

def write_batch_tables(state: ExperimentState, out_dir: Path) -> List[Path]:
    """batch_<k>.csv with physical parameters and loss components per sample."""
    columns = [d.column for d in state.space.dims]
    written = []
    for k in range(state.last_batch + 1):
        samples = state.batch(k)
        physical = denormalize(state.space, np.array([s.x for s in samples], dtype=float))
        frame = pd.DataFrame(physical, columns=columns)
        frame.insert(0, "sample_id", np.arange(len(samples)))
        frame.insert(0, "batch", k)
        frame["geom_loss"] = [s.geom_loss for s in samples]
        frame["yield_loss"] = [s.yield_loss for s in samples]
        frame["loss"] = [s.loss for s in samples]
        frame["droplet_count"] = [s.droplet_count for s in samples]
        frame["skipped"] = [s.skipped for s in samples]

        path = out_dir / f"batch_{k}.csv"
        try:
            frame.to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
        except OSError as e:
            raise IoError(str(path), e.strerror or str(e))
        written.append(path)
    return written


# Commands

def cmd_run(args: argparse.Namespace) -> int:
    ok, error_msg = validate_jobs(args.jobs)
    if not ok:
        raise ConfigError("jobs", error_msg)
    if args.acquisition is not None:
        ok, error_msg = validate_acquisition_name(args.acquisition)
        if not ok:
            raise ConfigError("acquisition", error_msg)
    if args.beta is not None and args.beta <= 0:
        raise ConfigError("beta", "must be positive")

    experiment = load_experiment_file(args.config) if args.config else default_experiment_file()
    spec = args.device or experiment.device_spec() or "inkjet-sim"
    space = experiment.space or default_space(spec)
    options = dict(experiment.device)
    options.setdefault("skip_failed_samples", experiment.experiment.get("skip_failed_samples", False))
    device = create_device(spec, space, options)

    exp_config = experiment.to_config(
        count_max=device.count_max,
        acquisition=args.acquisition.lower() if args.acquisition else None,
        lcb_beta=args.beta,
    )
    device.count_max = exp_config.count_max

    out = args.out or Path(config.DATA_DIR) / "run"
    state_path = out / STATE_FILE
    state = load_state(state_path) if args.resume and state_path.exists() else None

    with device:
        state, report = run_experiment(
            exp_config, device, seed=args.seed, state=state, jobs=args.jobs,
            checkpoint=state_path, progress=not args.quiet,
        )

    report.save(out / REPORT_FILE)
    write_batch_tables(state, out)
    write_report(state, out / ANALYSIS_DIR, exp_config.feasibility_threshold)

    print(f"state={state_path}")
    print(f"samples={len(state.samples)}")
    print(f"best_loss={report.best_loss!r}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    if args.count_max < 1:
        raise ConfigError("count_max", "must be >= 1")

    try:
        opts = SegOpts(marker_frac=args.marker_frac, min_area=args.min_area)
    except ValueError as e:
        raise ConfigError("segmentation", str(e).splitlines()[0])

    image = load_image(args.image)
    result = score(image, opts, args.count_max)
    print(f"loss={result.loss!r}")
    print(f"geom_loss={result.geom_loss!r}")
    print(f"yield_loss={result.yield_loss!r}")
    print(f"count={result.droplet_count}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    state = load_state(args.state)
    out = args.out or args.state.parent / ANALYSIS_DIR
    written = write_report(state, out, args.threshold)
    print(f"files={len(written)}")
    print(f"out={out}")
    return 0


COMMANDS = {"run": cmd_run, "score": cmd_score, "report": cmd_report}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_console_target("stderr")
    try:
        try:
            config.validate()
        except ValueError as e:
            raise ConfigError("environment", str(e))
        return COMMANDS[args.command](args)
    except DropletBoError as e:
        print(e.to_machine_line(), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        log_error(logger, e, args.command)
        message = str(e).replace('"', "'").replace("\n", " ")
        print(f'error={type(e).__name__} message="{message}"', file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
