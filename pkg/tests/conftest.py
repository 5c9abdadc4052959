import gocom  # noqa: F401  (pins BLAS threads before numpy spins up pools)
