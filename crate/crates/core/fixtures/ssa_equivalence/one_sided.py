def f(flag, v):
    total = v
    if flag:
        total += 10
    return total


INPUTS = [(True, 1), (False, 1), (True, -10), (0, 3)]
