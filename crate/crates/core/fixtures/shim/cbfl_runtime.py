"""Minimal recording shim used by the Rust test suite.

Loaded as a pytest plugin (`-p cbfl_runtime`) and imported by instrumented
programs as `__cbfl`. Records go to the JSONL file named by
CBFL_VIOLATIONS_PATH, one line per write.
"""

import contextvars
import json
import os
import sys

import pytest

SINK_ENV = "CBFL_VIOLATIONS_PATH"

_context = contextvars.ContextVar("cbfl_context", default=None)


class _TestContext:
    def __init__(self, test_id):
        self.test_id = test_id
        self.records = []
        self.temporal = {}
        self.failed = False
        self.ordinal = 0


def _emit(record):
    path = os.environ.get(SINK_ENV)
    if not path:
        return
    line = json.dumps(record, sort_keys=True) + "\n"
    fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
    try:
        os.write(fd, line.encode("utf-8"))
    finally:
        os.close(fd)


def check(cid, thunk):
    ctx = _context.get()
    if ctx is None:
        return None
    line = sys._getframe(1).f_lineno
    err = None
    try:
        verdict = "satisfied" if thunk() else "violated"
    except Exception as exc:  # noqa: BLE001
        verdict = "eval_error"
        err = "%s: %s" % (type(exc).__name__, exc)
    ctx.ordinal += 1
    record = {"kind": "check", "test_id": ctx.test_id, "cid": cid,
              "verdict": verdict, "line": line, "ts": ctx.ordinal}
    if err is not None:
        record["err"] = err
    ctx.records.append(record)
    return None


def snapshot(cid, thunk):
    ctx = _context.get()
    if ctx is None:
        return None
    try:
        ctx.temporal[cid] = thunk()
    except Exception:  # noqa: BLE001
        ctx.temporal.pop(cid, None)
    return None


def snapshot_value(cid):
    ctx = _context.get()
    return None if ctx is None else ctx.temporal.get(cid)


def temporal_enter(cid):
    ctx = _context.get()
    if ctx is not None:
        ctx.temporal["enter:" + cid] = ctx.temporal.get("enter:" + cid, 0) + 1


def temporal_exit(cid):
    ctx = _context.get()
    if ctx is not None:
        ctx.temporal["exit:" + cid] = ctx.temporal.get("exit:" + cid, 0) + 1


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_protocol(item, nextitem):
    ctx = _TestContext(item.nodeid)
    token = _context.set(ctx)
    item._cbfl_context = ctx
    try:
        yield
    finally:
        _context.reset(token)
        for record in ctx.records:
            _emit(record)
        _emit({"kind": "outcome", "test_id": ctx.test_id, "passed": not ctx.failed})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    ctx = getattr(item, "_cbfl_context", None)
    if ctx is not None and report.failed:
        ctx.failed = True
