import logging

import numpy as np
import pytest

from kswap import ScanCollection, Volume

# Donor-count warnings fire on purpose all over the benchmark runs.
logging.getLogger("kswap.transfer").setLevel(logging.ERROR)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_volume(data, kind="intensity", vol_id="v", domain="d", spacing=(1.0, 1.0, 1.0)):
    return Volume(data=np.asarray(data, dtype=np.float32), spacing=spacing,
                  id=vol_id, domain=domain, kind=kind)


def make_scan_collection(rng, n_scans=3, shape=(4, 16, 16), domain="src"):
    scans = []
    for k in range(n_scans):
        data = rng.random(shape, dtype=np.float64)
        data = (data - data.min()) / (data.max() - data.min())
        scans.append(make_volume(data, vol_id=f"{domain}_s{k}", domain=domain))
    return ScanCollection(scans=scans, domain=domain)
