"""Emergency ad hoc mesh simulator.

A deterministic discrete-event model of a disaster-area network: victim
phones, battery-powered relay routers, and a rescue station exchange
prioritized emergency messages over proactive link-state routing.  The
package doubles as the station-side service implementation (HTTP/JSON
console API, victim tracking, position estimation).
"""

from lifeline.params import SimParams

__all__ = ["SimParams"]
__version__ = "0.1.0"
