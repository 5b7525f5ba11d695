def f(x, y):
    z = 0
    if x > 0:
        if y > 0:
            z = 1
        else:
            z = 2
        z += 10
    else:
        z = -1
    return z


INPUTS = [(1, 1), (1, -1), (-1, 1), (0, 0)]
