"""
CLI constants: exit codes, output file names, log format.
Pure values: no I/O. Used by smgi.py and the cli package.
"""

EXIT_OK = 0
EXIT_CERTIFICATE_FAILED = 1
EXIT_CONFIG_ERROR = 2

LOG_FORMAT = "[%(name)s] %(message)s"

MANIFEST_NAME = "manifest.json"
REPORT_NAME = "report.json"
TRAJECTORY_CSV = "trajectory.csv"
BOUND_SWEEP_CSV = "bound_sweep.csv"
GSRM_CSV = "gsrm.csv"
PROTOCOL_CSV = "protocol.csv"
SUITE_NAMES = ("minimality", "strict_inclusion", "tooluse")
BOUND_PRESETS = ("pacbayes_basic", "structural")

# Default empirical risk for `bound` when --emp is not given
DEFAULT_EMPIRICAL_RISK = 0.1
SUMMARY_DIGITS = 4
