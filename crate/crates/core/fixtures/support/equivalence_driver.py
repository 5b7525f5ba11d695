"""Run `f` from a module file on each of its INPUTS and print the outcomes.

usage: equivalence_driver.py MODULE_PATH [--shim]

Each outcome is ["ok", repr(result)] or ["raise", exception type name].
With --shim, a cbfl_runtime test context is active so inserted checks are
evaluated, and the number of check records is printed as well.
"""

import copy
import importlib.util
import json
import sys


def load(path):
    spec = importlib.util.spec_from_file_location("subject", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    path = sys.argv[1]
    shim = "--shim" in sys.argv[2:]
    ctx = None
    if shim:
        import cbfl_runtime

        ctx = cbfl_runtime._TestContext("driver")
        cbfl_runtime._context.set(ctx)
    module = load(path)
    outcomes = []
    for args in module.INPUTS:
        try:
            outcomes.append(["ok", repr(module.f(*copy.deepcopy(args)))])
        except Exception as exc:  # noqa: BLE001
            outcomes.append(["raise", type(exc).__name__])
    result = {"outcomes": outcomes}
    if ctx is not None:
        result["checks"] = len(ctx.records)
        result["eval_errors"] = [r.get("err") for r in ctx.records if r["verdict"] == "eval_error"]
    print(json.dumps(result))


if __name__ == "__main__":
    main()
