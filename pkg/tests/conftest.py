import pytest

from hdcam.genomics import build_db, random_genome, simulate_reads

GENOME_LENGTH = 29_903


@pytest.fixture(scope="session")
def viral_genome():
    """Random stand-in with the length of a SARS-CoV-2 reference."""
    return random_genome(GENOME_LENGTH, seed=2020, accession="SYNTH_CoV")


@pytest.fixture(scope="session")
def viral_db(viral_genome):
    return build_db(viral_genome, k=64)


@pytest.fixture(scope="session")
def other_genome():
    return random_genome(GENOME_LENGTH, seed=1918, accession="SYNTH_FLU")


@pytest.fixture(scope="session")
def positive_reads(viral_genome):
    return simulate_reads(viral_genome, 10_000, k=64, seed=11)


@pytest.fixture(scope="session")
def negative_reads(other_genome):
    return simulate_reads(other_genome, 10_000, k=64, seed=12)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, summary = RESULTS[n]
        terminalreporter.write_line(f"{n:2d} {'PASS' if ok else 'FAIL'}  {summary}")
    passed = sum(ok for ok, _ in RESULTS.values())
    terminalreporter.write_line(f"{passed}/{len(RESULTS)} criteria pass")
