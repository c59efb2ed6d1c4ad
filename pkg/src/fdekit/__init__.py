"""fdekit: simulation and algebraic persistence/permanence certificates for
population models with unbounded delay."""

__version__ = "0.1.0"
