def f(xs):
    counts = {}
    for x in xs:
        counts[x] = counts.get(x, 0)
        counts[x] += 1
    return sorted(counts.items())


INPUTS = [([],), (["a", "b", "a"],), ([1, 1, 1],)]
