"""Figure rendering for csmqc experiment CSV files.

Consumes only the documented CSV schema
(``metric,<coords...>,value,two_se,n_samples``); never recomputes statistics.
"""

__version__ = "0.1.0"
