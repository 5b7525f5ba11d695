def f(xs):
    for x in xs:
        if x:
            break
    else:
        x = None
    return x
