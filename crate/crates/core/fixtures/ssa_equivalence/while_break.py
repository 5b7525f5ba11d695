def f(xs, target):
    i = 0
    found = -1
    while i < len(xs):
        if xs[i] == target:
            found = i
            break
        i += 1
    return found, i


INPUTS = [([1, 2, 3], 2), ([], 1), ([5, 5], 7), ([0], 0)]
