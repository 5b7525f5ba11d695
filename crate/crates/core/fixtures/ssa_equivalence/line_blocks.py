def f(x):
    if x > 0: return "pos"
    y = x
    if y == 0: y = 1
    else: y = -y
    return y


INPUTS = [(1,), (0,), (-4,)]
