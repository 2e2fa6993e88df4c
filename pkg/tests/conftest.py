import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from filtpen.config import bundled_config, load_link_spec  # noqa: E402
from filtpen.linkmodel import AmplifierSpec, LinkSpec  # noqa: E402
from filtpen.trxmodel import TrxModel  # noqa: E402

RS = 63.1e9
F0 = 193.9e12


@pytest.fixture(scope="session")
def metro8() -> LinkSpec:
    return load_link_spec(bundled_config("metro8"))


def receiver_noise_link(filters=(), rolloff=0.15, snr_db=15.0, **kw) -> LinkSpec:
    """Link whose only noise is receiver-side AWGN at ``snr_db`` (all filters upstream)."""
    return LinkSpec(
        rs=RS,
        rolloff=rolloff,
        f0=F0,
        p_tx=1e-3,
        filters=list(filters),
        noise_groups=[[] for _ in filters],
        rx_amplifiers=[],
        trx=TrxModel.from_db(snr_db, -200.0),
        **kw,
    )


def random_link(rng: np.random.Generator, n_filters: int = 3, rolloff: float = 0.15) -> LinkSpec:
    """Random erf cascade with one amplifier group in front of every filter
    plus a receiver group: ``n_filters + 1`` noise sources."""
    from filtpen.linkmodel import ErfFilter

    filters = [ErfFilter(rng.uniform(50e9, 110e9), rng.uniform(6e9, 14e9)) for _ in range(n_filters)]
    groups = [[AmplifierSpec.from_db(rng.uniform(5, 20), rng.uniform(4, 9))] for _ in range(n_filters)]
    rx = [AmplifierSpec.from_db(rng.uniform(5, 20), rng.uniform(4, 9))]
    return LinkSpec(RS, rolloff, F0, 1e-3, filters, groups, rx)
