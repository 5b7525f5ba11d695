def f(a, b):
    x = a
    x += b
    x *= 2
    x -= a
    x //= 3
    return x


INPUTS = [(1, 2), (10, -4), (0, 0), (7, 7)]
