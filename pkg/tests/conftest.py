import numpy as np
import pytest

from nrlab.symbols import ClassicalSymbolProfile, MetricParams, OperatorCoefficient


@pytest.fixture
def free_metric():
    return MetricParams.free(1)


@pytest.fixture
def wavy_metric():
    """Small generic perturbation of all second-order coefficients (d = 1)."""
    return MetricParams(
        d=1,
        alpha=ClassicalSymbolProfile(amplitude=0.1, waves=(((0.7, 1.3), 0.4, 0.2),)),
        w=(ClassicalSymbolProfile(amplitude=0.08, waves=(((1.1, -0.4), 0.3, 0.0),)),),
        hjk=((ClassicalSymbolProfile(amplitude=0.12, waves=(((0.3, 0.9), 0.0, 0.5),)),),),
    )


def bandlimited_gaussian(grid, K, width=4.0, k0=1.0):
    """Spatially localized field with spectrum hard-truncated to |xi| <= K."""
    x = grid.axis_points(0)
    vals = np.exp(-((x / width) ** 2)) * np.exp(1j * k0 * x)
    ch = np.fft.fftn(vals)
    ch[np.abs(grid.axis_freqs(0)) > K] = 0.0
    return np.fft.ifftn(ch)
