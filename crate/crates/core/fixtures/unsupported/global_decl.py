COUNT = 0


def f():
    global COUNT
    COUNT = COUNT + 1
    return COUNT
