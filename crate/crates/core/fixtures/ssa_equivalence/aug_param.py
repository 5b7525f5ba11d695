def f(n, step=2):
    n += step
    n **= 2
    return n


INPUTS = [(1,), (3, 1), (-2,), (0, 0)]
