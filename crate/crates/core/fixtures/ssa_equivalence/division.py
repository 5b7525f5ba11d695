def f(a, b):
    q = a / b
    q += 1
    return q


INPUTS = [(1, 2), (3, 0), (0, 5), (-4, 2)]
