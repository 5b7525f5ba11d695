def softmax(xs):
    if not xs:
        return []
    m = max(xs)
    shifted = [x + m for x in xs]
    exps = [exp(y) for y in shifted]
    s = sum(exps)
    return [e / s for e in exps]


def exp(y):
    # Saturate instead of raising, like a float32 kernel would.
    try:
        return math.exp(y)
    except OverflowError:
        return float("inf")


import math  # noqa: E402
