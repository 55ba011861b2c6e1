"""Calls a function from its real package and prints what it observed.

Usage: observe_reference.py ROOT MODULE QUALNAME RECEIVER INPUTS_JSON

RECEIVER is a class path to instantiate per call (with the JSON list in
RECEIVER_ARGS), or "-" for plain calls.
"""
import importlib
import json
import sys


def observe(fn, args):
    try:
        return ["ok", repr(fn(*args))]
    except Exception as e:  # noqa: BLE001
        return ["raise", type(e).__name__, str(e)]


def resolve(root, path):
    for part in path.split("."):
        root = getattr(root, part)
    return root


def main():
    root, module, qualname, receiver, receiver_args, inputs = sys.argv[1:]
    sys.path.insert(0, root)
    mod = importlib.import_module(module)
    fn = resolve(mod, qualname)
    rargs = json.loads(receiver_args)
    out = []
    for args in json.loads(inputs):
        if receiver == "-":
            out.append(observe(fn, args))
        else:
            cls = resolve(mod, receiver)
            out.append(observe(lambda *a: fn(cls(*rargs), *a), args))
    print(json.dumps(out))


if __name__ == "__main__":
    main()
