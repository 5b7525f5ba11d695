def f(pairs):
    lo = None
    hi = None
    for a, b in pairs:
        if lo is None or a < lo:
            lo = a
        if hi is None or b > hi:
            hi = b
    return lo, hi


INPUTS = [([],), ([(1, 2)],), ([(3, 4), (0, 9), (2, 5)],)]
