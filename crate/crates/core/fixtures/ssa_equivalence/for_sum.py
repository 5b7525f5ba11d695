def f(xs):
    total = 0
    for x in xs:
        total += x
    return total


INPUTS = [([],), ([1, 2, 3],), ([-1, 1],), ([0.5, 0.25],)]
