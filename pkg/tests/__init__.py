"""
hamlearn Tests

Unit tests for the simulator, Trotter synthesis and the learners.
"""
