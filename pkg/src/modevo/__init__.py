"""Evolution of modular robot bodies and CPG controllers for directed locomotion."""

__version__ = "0.1.0"
