import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import golden_setup  # noqa: E402

from kamtori.engine import run_iteration  # noqa: E402


@pytest.fixture(scope="session")
def golden_run():
    """One shared measured-mode run of the golden-2d desk problem."""
    decomp, chain, sched, opts = golden_setup()
    run = run_iteration(decomp, chain, sched, opts, np.eye(2), theta=0.05)
    assert run.error is None, run.error
    return run, chain
