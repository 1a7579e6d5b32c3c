"""Anytime factored-value Monte Carlo tree search for cooperative multi-agent MDPs."""
