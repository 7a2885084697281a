import socket

import numpy as np
import pytest

# Criterion PASS/FAIL lines recorded by test_acceptance; echoed in the
# terminal summary so they are visible without -s/-rA.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from uniformid.datafactory import SyntheticConfig, generate_dataset, generate_school_registry
from uniformid.schema import (
    COLORS,
    ITEMS,
    AttributeLabel,
    GroundTruth,
    ImageRecord,
    ImageSource,
)


def random_label(rng: np.random.Generator) -> AttributeLabel:
    return AttributeLabel(colors=tuple(COLORS[int(rng.integers(len(COLORS)))] for _ in ITEMS))


def random_distribution_rows(rng: np.random.Generator) -> np.ndarray:
    rows = rng.random((len(ITEMS), len(COLORS)))
    return rows / rows.sum(axis=1, keepdims=True)


def make_fake_records(
    num_schools: int, per_school: int, nonuniform: int, rng=None
) -> list[ImageRecord]:
    """Tiny 8x8 records for split/metric tests that never touch pixels."""
    rng = rng or np.random.default_rng(0)
    records = []
    k = 0
    for s in range(num_schools):
        for _ in range(per_school):
            records.append(
                ImageRecord(
                    image_id=f"u{k:05d}",
                    pixels=np.full((8, 8, 3), 100, dtype=np.uint8),
                    byte_size=192,
                    source=ImageSource.SYNTHETIC,
                    school_id=f"SCH-{s + 1:03d}",
                    ground_truth=GroundTruth(uniform_flag=True, label=random_label(rng)),
                )
            )
            k += 1
    for _ in range(nonuniform):
        records.append(
            ImageRecord(
                image_id=f"n{k:05d}",
                pixels=np.full((8, 8, 3), 50, dtype=np.uint8),
                byte_size=192,
                source=ImageSource.SYNTHETIC,
                school_id=None,
                ground_truth=GroundTruth(uniform_flag=False, label=random_label(rng)),
            )
        )
        k += 1
    return records


@pytest.fixture(scope="session")
def small_synth():
    """Shared small rendered dataset: 4 schools x 12 + 40 casual at 224px."""
    config = SyntheticConfig(
        seed=2024, num_schools=4, uniform_images_per_school=12, num_nonuniform_images=40
    )
    registry = generate_school_registry(config)
    dataset = generate_dataset(config, registry)
    return config, registry, dataset


@pytest.fixture()
def no_egress(monkeypatch):
    """Refuse any socket connection to a non-loopback address."""
    real_connect = socket.socket.connect

    def guarded(self, address, *args, **kwargs):
        host = address[0] if isinstance(address, tuple) else str(address)
        if host not in ("127.0.0.1", "::1", "localhost"):
            raise AssertionError(f"egress attempt to {address!r}")
        return real_connect(self, address, *args, **kwargs)

    monkeypatch.setattr(socket.socket, "connect", guarded)
    monkeypatch.setattr(
        socket,
        "getaddrinfo",
        _loopback_only_getaddrinfo(socket.getaddrinfo),
    )
    return guarded


def _loopback_only_getaddrinfo(real):
    def guarded(host, *args, **kwargs):
        if host not in ("127.0.0.1", "::1", "localhost", None, ""):
            raise AssertionError(f"DNS lookup attempt for {host!r}")
        return real(host, *args, **kwargs)

    return guarded
