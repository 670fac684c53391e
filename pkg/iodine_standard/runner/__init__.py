"""
Scenario registry, configuration and the command-line runner
"""
