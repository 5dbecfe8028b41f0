import pytest

from gendistill.distill import PipelineConfig

# Small enough that a full gen_distill pipeline runs in a couple of seconds.
TINY = dict(per_class=20, bpe_vocab=600, n_synthetic=40, max_tokens=40,
            teacher_ensemble=2, teacher_embed_dim=16, teacher_filters=8, teacher_epochs=2,
            embed_dim=16, filters_per_width=8, hidden_layers=2, hidden_size=16, epochs=2)


@pytest.fixture
def tiny_cfg():
    return PipelineConfig(**TINY)


# -- acceptance verdict lines --------------------------------------------------

ACCEPTANCE = {}   # criterion number -> (passed, detail)
N_CRITERIA = 11


def record_verdict(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    ran = any("test_acceptance" in r.nodeid
              for key in ("passed", "failed", "error")
              for r in terminalreporter.stats.get(key, []))
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: FAIL  no verdict (errored or deselected)")
