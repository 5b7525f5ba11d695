def f(x, scale=1.0):
    y = x * scale
    if y > 100:
        x = 100
    else:
        x = y
    x -= 1
    return x


INPUTS = [(10,), (10, 20), (-5, 2), (0, 0)]
