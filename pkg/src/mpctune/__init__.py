"""
mpctune: closed-loop MPC auto-tuning with constrained Bayesian optimization.

"""
