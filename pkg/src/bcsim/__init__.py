"""Biexciton-exciton cascade in a microcavity: master-equation steady states,
emission spectra, cavity-detuning sweeps and their line analysis."""
