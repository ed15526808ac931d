"""Clock-encoded quantum dynamics as a ground-state problem, solved with
neural quantum states trained by variational Monte Carlo, plus an
exact-diagonalization oracle for desk-scale verification."""

__version__ = "0.1.0"
