#!/usr/bin/env python3
"""
Reproduction script - runs every experiment in order and prints a summary.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app import cli
from config import Config

REPS = int(os.environ.get('FLM_REPS', '50'))


def run(*args):
    """Invoke one subcommand; click's SystemExit is turned into a return code."""
    try:
        cli.main(args=[str(arg) for arg in args], standalone_mode=False, obj=Config)
    except SystemExit as exc:
        return exc.code or 0
    return 0


def reproduce_all():
    """Simulate, fit and replicate both examples, then the energy data when present."""
    print("🚀 Starting full reproduction...")
    print("=" * 50)
    out_dir = Config.OUT_DIR
    steps = []
    for example in (1, 2):
        stem = os.path.join(out_dir, f'example{example}')
        steps += [
            (f"Simulating example {example}...",
             ['--out-dir', stem, 'simulate', '--example', example]),
            (f"Norm-versus-r table for example {example}...",
             ['--out-dir', stem, 'path', '--data', os.path.join(stem, f'example{example}.json')]),
            (f"Fitting example {example} (sigma rule, selected dimension, debiased)...",
             ['--out-dir', stem, 'fit', '--data', os.path.join(stem, f'example{example}.json'),
              '--truth', os.path.join(stem, f'example{example}_truth.csv'),
              '--select', 'sigma', '--project', 'auto', '--debias']),
            (f"Monte-Carlo recovery for example {example}, sigma rule ({REPS} reps)...",
             ['--out-dir', os.path.join(stem, 'mc_sigma'), 'montecarlo', '--reps', REPS,
              '--example', example, '--select', 'sigma', '--project', 'auto']),
            (f"Monte-Carlo recovery for example {example}, cross-validation ({REPS} reps)...",
             ['--out-dir', os.path.join(stem, 'mc_cv'), 'montecarlo', '--reps', REPS,
              '--example', example, '--select', 'cv']),
        ]
    if os.path.exists(Config.ENERGY_CSV):
        steps.append(("Appliances-energy regression...",
                      ['--out-dir', os.path.join(out_dir, 'energy'), 'energy']))
    else:
        print(f"⚠️  {Config.ENERGY_CSV} not found, the energy step is skipped\n")

    failures = 0
    for number, (title, args) in enumerate(steps, start=1):
        print(f"Step {number}: {title}")
        code = run(*args)
        if code:
            failures += 1
            print(f"❌ Step {number} failed (exit code {code})\n")
        else:
            print(f"✅ Step {number} done\n")

    print("=" * 50)
    if failures:
        print(f"❌ {failures} of {len(steps)} steps failed")
        sys.exit(1)
    print(f"🎉 All {len(steps)} steps finished; tables and reports are under {out_dir}/")


if __name__ == '__main__':
    reproduce_all()
