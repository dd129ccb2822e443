"""Interpreter and checkers for a call-by-value language with let-polymorphism and polymorphic algebraic effects."""

__version__ = "0.1.0"
