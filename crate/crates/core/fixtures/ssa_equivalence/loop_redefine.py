def f(xs):
    prev = None
    rises = 0
    for x in xs:
        if prev is not None and x > prev:
            rises += 1
        prev = x
    return rises, prev


INPUTS = [([],), ([1, 2, 3],), ([3, 2, 1],), ([1, 3, 2, 4],)]
