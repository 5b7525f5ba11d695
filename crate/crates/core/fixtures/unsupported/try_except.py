def f(text):
    try:
        n = int(text)
    except ValueError:
        n = 0
    n += 1
    return n


INPUTS = [("4",), ("x",), ("-2",), ("",)]
