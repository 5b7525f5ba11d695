def moving_average(xs, k):
    if k <= 0:
        raise ValueError("k must be positive")
    out = []
    window = 0.0
    for i, x in enumerate(xs):
        window += x
        if i >= k:
            window -= xs[i - k + 1]
        if i >= k - 1:
            out.append(window / k)
    return out
