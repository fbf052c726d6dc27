"""Tests for utils module: stderr logging and the ordered thread pool map."""

import threading

import pytest

from utils import log, map_parallel

# ── log ───────────────────────────────────────────────────────────────────


class TestLog:
    def test_warning_always_shown(self, capsys):
        log("careful", "warning")
        captured = capsys.readouterr()
        assert captured.err == "Warning: careful\n"
        assert captured.out == ""

    def test_error_prefix(self, capsys):
        log("broken", "error")
        assert capsys.readouterr().err == "Error: broken\n"

    def test_info_hidden_by_default(self, capsys):
        log("progress")
        assert capsys.readouterr().err == ""

    def test_info_shown_when_verbose(self, monkeypatch, capsys):
        monkeypatch.setenv("FLOQUET_VERBOSE", "1")
        log("progress")
        log("details", "debug")
        assert capsys.readouterr().err == "progress\n"

    def test_debug_shown_at_level_two(self, monkeypatch, capsys):
        monkeypatch.setenv("FLOQUET_VERBOSE", "2")
        log("details", "debug")
        assert capsys.readouterr().err == "[debug] details\n"


# ── map_parallel ──────────────────────────────────────────────────────────


class TestMapParallel:
    def test_preserves_order(self):
        assert map_parallel(lambda x: x * x, range(20), max_workers=4) == [x * x for x in range(20)]

    def test_serial_when_one_worker(self):
        threads = set()

        def record(x):
            threads.add(threading.get_ident())
            return x

        assert map_parallel(record, [1, 2, 3], max_workers=1) == [1, 2, 3]
        assert threads == {threading.get_ident()}

    def test_worker_count_from_env(self, monkeypatch):
        monkeypatch.setenv("FLOQUET_MAX_WORKERS", "1")
        threads = set()

        def record(x):
            threads.add(threading.get_ident())
            return x

        map_parallel(record, range(5))
        assert threads == {threading.get_ident()}

    def test_reraises_worker_error(self):
        def boom(x):
            if x == 3:
                raise ValueError("bad item")
            return x

        with pytest.raises(ValueError, match="bad item"):
            map_parallel(boom, range(6), max_workers=3)

    def test_empty_input(self):
        assert map_parallel(str, [], max_workers=4) == []
