"""ConvoWaste: deterministic simulator and controller for a six-class
conveyor waste segregation machine.

Subsystems:

* :mod:`convowaste.domain` -- waste taxonomy, servo routing, bin model,
  machine configuration.
* :mod:`convowaste.classifiers` -- pluggable classifiers (perfect,
  scripted, stochastic, external adapter).
* :mod:`convowaste.link` / :mod:`convowaste.mcu` -- bit-exact serial
  frame codec and the MCU emulator it talks to.
* :mod:`convowaste.sim` -- the discrete-event belt simulator.
* :mod:`convowaste.telemetry` -- bin fill monitoring, SMS-style
  notifications, display state.
* :mod:`convowaste.gateway` -- live operator gateway (TCP / WebSocket).
* :mod:`convowaste.cli` -- command line entry point.
"""

__version__ = "0.1.0"
