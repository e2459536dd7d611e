"""Numerical core: shifts, continued fractions, coding, pressure, flow pressure and measures."""
