"""High-availability switching for ISO 8583 traffic.

An active-passive failover proxy keeps card-authorization style messages
flowing to whichever fraud-detection backend is healthy, judged by CPU
load and network-management echo probes.  The package also ships the
simulated backends, a stress-test driver, a per-message round-robin relay
kept as a known-defective baseline, and daily SLA reporting.
"""

__version__ = "0.1.0"
