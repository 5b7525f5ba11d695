def f(xs):
    if not xs:
        return None
    best = xs[0]
    if len(xs) == 1:
        return best
    best = max(best, xs[1])
    return best


INPUTS = [([],), ([4],), ([1, 9],), ([9, 1, 20],)]
