"""carebot: deterministic companion-robot simulator and teleoperation service.

Core pieces: an occupancy-grid world with differential-drive physics and
ultrasonic sensing (`world`), a symbolic pan/tilt camera (`camera`),
dead-reckoning coverage navigation (`nav`), a simulated wearable with
vitals alerts and medication reminders (`care`), the tick-loop supervisor
(`supervisor`), the line-JSON wire protocol (`protocol`), headless run
plumbing (`runner`), and a FastAPI/WebSocket service (`service`).
"""

__version__ = "0.1.0"
