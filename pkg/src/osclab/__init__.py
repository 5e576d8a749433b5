"""osclab: surrogate experimentation engine for a stirred 5x5
chemical-oscillator grid.

A modified encoder-decoder transformer learns to map motor actuation
sequences to oscillation sequences; on top of it sit a genetic XOR search,
a backprop-trained controller, a kernel-style field upscaler, a session
service and a CLI.
"""

__version__ = "0.1.0"
