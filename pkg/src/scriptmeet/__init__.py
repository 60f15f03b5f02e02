"""Event-sourced live-transcript collaboration engine.

Speech (or a scripted stand-in) is segmented into per-speaker utterance
bubbles; participants like, highlight, tag, comment on, and edit them in
real time; bubbles nobody touched expire off the screen after a TTL; and
every state change is an append-only event, which drives reconnection,
export, and the participation analytics.
"""

__version__ = "0.1.0"
