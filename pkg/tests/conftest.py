import struct

import numpy as np
import pytest
from scipy import ndimage

from topocomp import grid
from topocomp.basecomp import BaseCompressor, register_compressor


class BlurCompressor(BaseCompressor):
    """Test-only base compressor that smooths the field, wrecking topology."""

    id = "blur"

    def __init__(self, params=None):
        self.sigma = float((params or {}).get("sigma", 2.0))

    def params(self):
        return {"sigma": self.sigma}

    def compress(self, fld):
        vol = fld.values.reshape(fld.dims, order="F")
        sm = ndimage.gaussian_filter(vol, self.sigma)
        return struct.pack("<d", self.sigma) + \
            sm.astype("<f4").ravel(order="F").tobytes()

    def decompress(self, payload, dims):
        vals = np.frombuffer(payload[8:], dtype="<f4").astype(np.float64)
        return grid.ScalarField(dims, vals)


register_compressor("blur", lambda params: BlurCompressor(params))


def random_field(rng, dims=None, kind="noise"):
    if dims is None:
        dims = tuple(int(d) for d in rng.integers(4, 11, 3))
    n = int(np.prod(dims))
    if kind == "noise":
        vals = rng.random(n)
    elif kind == "intnoise":
        vals = rng.integers(0, 8, n).astype(float)
    else:
        vol = rng.random(dims) + ndimage.gaussian_filter(rng.random(dims) * 3, 2)
        vals = vol.ravel(order="F")
    return grid.ScalarField(dims, vals)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
