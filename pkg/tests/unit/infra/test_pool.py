import pytest

from src.infra.pool import THREADS_ENV, get_thread_count, ordered_map


@pytest.mark.parametrize("workers", [1, 3])
def test_results_keep_input_order(workers):
    assert ordered_map(lambda x: x * x, range(10), workers=workers) == [x * x for x in range(10)]


def test_thread_count_from_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "6")
    assert get_thread_count() == 6
    monkeypatch.setenv(THREADS_ENV, "0")
    assert get_thread_count() == 1


def test_invalid_thread_count_falls_back(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "many")
    assert get_thread_count(default=2) == 2
