"""
Core modules for the fractal projection lab.

Measures, fractal builders, the orthogonal group, Fourier analysis,
dimension estimators, distance measures and the experiment runner.
"""
