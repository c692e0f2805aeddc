"""Jump-activity index estimation: stable moments, path simulation, power
variation, and the adaptive two-step estimator."""

try:
    from ._pja import *  # noqa: F401,F403  installed-package layout
    from ._pja import __doc__ as _core_doc
except ImportError:  # in-tree build: the extension sits on sys.path directly
    from _pja import *  # noqa: F401,F403
    from _pja import __doc__ as _core_doc

__version__ = "0.1.0"

__all__ = [
    "mu_p",
    "mu_pq",
    "pi_const",
    "k_kernel",
    "clt_cov_matrix",
    "optimal_power",
    "power_lower_bound",
    "power_upper_cap",
    "stable_sample",
    "simulate",
    "read_path",
    "write_path",
    "realized_pv",
    "b_ratio",
    "two_step",
    "feasible_avar",
    "DomainError",
    "IoError",
    "DegenerateError",
]
