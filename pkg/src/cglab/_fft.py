"""FFT backend shim.

The package lives on many small batched transforms (grids of 16..128 per
axis), where per-call overhead dominates.  torch.fft is the fastest of the
commonly available backends on such shapes; fall back to scipy.fft, then
numpy.fft.  All backends compute the same transform, so results differ only
at rounding level; the selected backend is fixed at import time.
"""

import numpy as np

try:
    import torch

    torch.set_num_threads(1)  # tiny transforms gain nothing from threads

    def fftn(x, axes=None):
        dim = axes if axes is not None else tuple(range(np.ndim(x)))
        arr = np.ascontiguousarray(x, dtype=complex)
        return torch.fft.fftn(torch.from_numpy(arr), dim=dim).numpy()

    def ifftn(x, axes=None):
        dim = axes if axes is not None else tuple(range(np.ndim(x)))
        arr = np.ascontiguousarray(x, dtype=complex)
        return torch.fft.ifftn(torch.from_numpy(arr), dim=dim).numpy()

    BACKEND = "torch"
except ImportError:  # pragma: no cover
    try:
        from scipy.fft import fftn, ifftn

        BACKEND = "scipy"
    except ImportError:
        from numpy.fft import fftn, ifftn

        BACKEND = "numpy"
