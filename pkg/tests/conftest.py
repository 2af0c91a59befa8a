import os

# single-threaded BLAS so timings and results match a plain single-core run
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import time

import pytest

from mldtco import dataset as D
from mldtco import mlp
from mldtco.refdev import RefFinFET, RefTFET
from mldtco.surrogate import from_nets, train_net

# acceptance results recorded by tests/test_acceptance.py: criterion -> [(ok, detail)]
ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[criterion]
        status = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        details = "; ".join(("" if ok else "FAILED ") + d for ok, d in checks)
        terminalreporter.write_line(f"criterion {criterion}: {status} ({details})")


@pytest.fixture(scope="session")
def finfet_trained():
    """Default-configuration FinFET net on the canonical 50 mV grid, with its wall time."""
    t0 = time.perf_counter()
    ds = D.canonicalize_symmetric(D.generate_grid(RefFinFET(), 0.0, 0.8, 0.05))
    net, hist = train_net(ds)
    return {"net": net, "history": hist, "dataset": ds, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def tfet_trained():
    """Default-configuration forward and reverse TFET nets on the 0-0.9 V grid."""
    t0 = time.perf_counter()
    fwd, rev = D.split_regions_tfet(D.generate_grid(RefTFET(), 0.0, 0.9, 0.05))
    net_f, _ = train_net(fwd)
    net_r, _ = train_net(rev)
    return {"nets": (net_f, net_r), "datasets": (fwd, rev), "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory, finfet_trained, tfet_trained):
    d = tmp_path_factory.mktemp("models")
    finfet_trained["net"].save(d / "nfinfet.json")
    net_f, net_r = tfet_trained["nets"]
    net_f.save(d / "ntfet_fwd.json")
    net_r.save(d / "ntfet_rev.json")
    return d


@pytest.fixture(scope="session")
def quick_finfet():
    """Small, briefly trained FinFET net for structural tests (accuracy irrelevant)."""
    ds = D.canonicalize_symmetric(D.generate_grid(RefFinFET(), 0.0, 0.8, 0.1))
    net, _ = train_net(ds, mlp.MLPSpec((3, 12, 12, 3)), mlp.TrainConfig(max_epochs=200, seed=3))
    return from_nets([net])


@pytest.fixture(scope="session")
def quick_tfet_nets():
    fwd, rev = D.split_regions_tfet(D.generate_grid(RefTFET(), 0.0, 0.9, 0.1))
    cfg = mlp.TrainConfig(max_epochs=200, seed=5)
    spec = mlp.MLPSpec((3, 12, 12, 3))
    return train_net(fwd, spec, cfg)[0], train_net(rev, spec, cfg)[0]
