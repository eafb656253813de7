"""mrlens: merge-request review analytics.

Detects MRs that bypass the normal review workflow (deviations), measures
their prevalence, and quantifies how excluding them changes regression models
of code-review completion time.
"""

__version__ = "0.1.0"
