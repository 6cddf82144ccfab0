"""Higher-order hidden Markov models for speaker identification."""
