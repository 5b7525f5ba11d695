LIMIT = 3


def f(xs):
    out = []
    for x in xs:
        if len(out) >= LIMIT:
            break
        out = out + [x]
    return out


INPUTS = [([],), ([1, 2, 3, 4, 5],), ([9],)]
