def f(xs, limit):
    seen = 0
    acc = 0
    for x in xs:
        if x < 0:
            continue
        if acc + x > limit:
            break
        acc += x
        seen += 1
    return acc, seen


INPUTS = [([1, 2, 3], 10), ([5, -1, 5, 5], 11), ([], 3), ([20], 1)]
