def f(a, b):
    if a > b:
        a, b = b, a
    diff = b - a
    return a, b, diff


INPUTS = [(1, 2), (5, 3), (4, 4), (-1, -7)]
