"""voxbeam: environment-lit stereo volumetric path tracing with a two-step
spatio-temporal denoiser, an offline harness, and a live streaming service."""

__version__ = "0.1.0"
