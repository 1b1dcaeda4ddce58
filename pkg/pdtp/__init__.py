"""
Discrete-time Prabhakar counting process toolkit
"""
__version__ = "1.0.0"
