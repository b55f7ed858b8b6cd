"""Visual state-space saliency stack: linear-time scan kernels, a dual-stream
hierarchical encoder, cross-modal fusion, a refinement decoder, and the
standard RGB-D saliency evaluation metrics, all on plain float64 arrays."""

__version__ = "0.1.0"
