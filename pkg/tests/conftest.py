"""Session-scoped fixtures shared between module tests and the acceptance run."""

import pytest

from nlscascade.lambda_set import build_base_set, scale_set


@pytest.fixture(scope="session")
def base_n3():
    return build_base_set(3, seed=0)


@pytest.fixture(scope="session")
def base_n5():
    return build_base_set(5, seed=0)


@pytest.fixture(scope="session")
def set_n3_17_12(base_n3):
    return scale_set(base_n3, 17, 12)


@pytest.fixture(scope="session")
def transfer_n5():
    """The N = 5 transfer orbit search is the slowest shared fixture."""
    from nlscascade.toy_model import find_transfer_orbit

    return find_transfer_orbit(5, 1e-2)


@pytest.fixture(scope="session")
def sqrt2():
    from nlscascade.diophantine import parse_omega

    return parse_omega("sqrt:2")


@pytest.fixture(scope="session")
def shell_17_12(set_n3_17_12, sqrt2):
    """Shell truncation around the scaled three-generation set.

    The detuning window drops slaved rows that oscillate faster than 1e4;
    they contribute nothing at these amplitudes but would force the solver
    below their period.
    """
    from nlscascade.nls_sim import shell_region

    return shell_region(set_n3_17_12, sqrt2, max_detuning=1e4)


@pytest.fixture(scope="session")
def shadow_ladder(set_n3_17_12, sqrt2, shell_17_12):
    """The lam = 4, 8, 16 shadowing ladder shared with the acceptance run."""
    from nlscascade.nls_sim import shadowing_experiment

    return shadowing_experiment(
        set_n3_17_12, sqrt2, [4.0, 8.0, 16.0], region=shell_17_12
    )


@pytest.fixture(scope="session")
def shadow_ladder_disabled(set_n3_17_12, sqrt2, shell_17_12):
    """Same ladder with the cubic term removed: a pure-bookkeeping control."""
    from nlscascade.nls_sim import shadowing_experiment

    return shadowing_experiment(
        set_n3_17_12, sqrt2, [4.0, 8.0, 16.0], region=shell_17_12,
        disable_nonlinearity=True,
    )
