"""Privacy-preserving smart-video-surveillance analytics stack.

Detector traces in, anonymized analytics out: edge tracking, epoch-rotated
cross-camera re-ID, occupancy statistics, a rule-based gateway with a keyed
store, and a query/push API. No pixels anywhere.
"""

__version__ = "0.1.0"
