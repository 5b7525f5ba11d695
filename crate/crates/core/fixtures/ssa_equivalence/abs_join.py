def f(x):
    if x < 0:
        y = -x
    else:
        y = x
    return y


INPUTS = [(-3,), (0,), (5,), (-0.5,)]
