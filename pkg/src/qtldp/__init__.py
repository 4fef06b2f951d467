"""Large deviations of quasi-Toeplitz quadratic functionals of Gauss-Markov chains."""
