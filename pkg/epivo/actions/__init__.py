"""CLI action entry points (simulate, run, train-denoiser, evaluate, plot, compare)."""
