"""Facial-prior motion transfer: animate a still face with the micro-motion of a driving clip."""

__version__ = "0.1.0"
