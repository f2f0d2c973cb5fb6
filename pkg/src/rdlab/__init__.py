"""rdlab: numerical laboratory for the 1-d Glauber+Kawasaki reaction-diffusion model."""

from .model import (
    Configuration,
    LocalRate,
    ReactionPolynomials,
    example_2_1,
    flip_map,
    exchange_map,
    flip_rate,
    glauber_kawasaki_rates,
    reaction_polynomials,
    potential_minima,
    is_attractive,
)

__version__ = "0.1.0"
