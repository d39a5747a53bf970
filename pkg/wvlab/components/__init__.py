"""Domain modules: optics, photon sampling, detector readout, inference and time series."""
