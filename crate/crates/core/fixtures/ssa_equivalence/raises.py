def f(d, key):
    if key not in d:
        raise KeyError(key)
    value = d[key]
    value += 1
    return value


INPUTS = [({"a": 1}, "a"), ({}, "x"), ({"b": 2.5}, "b")]
