"""Chernoff sampling for active testing and active regression."""

import json as _json

from ._chernoff import (
    ConfigError,
    InvalidArgument,
    IoError,
    __version__,
    compute_constants,
    derive_seed,
    example1,
    logistic_groups,
    minimax,
    relu_net,
    run_command,
    run_regression,
    run_trial,
    solve_min_eig_design,
    solve_verification_lp,
    three_group,
)


def report(command, config=None):
    """Run a command and return the parsed JSON report."""
    text = _json.dumps(config or {})
    return _json.loads(run_command(command, text, "json"))
