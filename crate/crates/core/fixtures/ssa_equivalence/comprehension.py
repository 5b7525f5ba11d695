def f(xs, k):
    scaled = [x * k for x in xs]
    kept = [s for s in scaled if s > 0]
    total = sum(kept)
    total += len(kept)
    return total


INPUTS = [([1, -2, 3], 2), ([], 1), ([0, 0], 5), ([-1], -1)]
