"""Moment-constrained H^-1 gradient flows on (0,1)."""

from ._core import (
    ConfigError,
    ProxFailure,
    flow,
    identity_suite,
    resolve_manifest,
    run,
    spectrum,
)

RECORD_COLUMNS = ("t", "mu0", "mu1", "mun", "lp_energy", "hy_norm_sq", "dissipation_residual")

__all__ = [
    "ConfigError",
    "ProxFailure",
    "RECORD_COLUMNS",
    "flow",
    "identity_suite",
    "resolve_manifest",
    "run",
    "spectrum",
]
