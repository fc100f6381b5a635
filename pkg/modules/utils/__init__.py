# Shared plumbing for every noisecalc module
