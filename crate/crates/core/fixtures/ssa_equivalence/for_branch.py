def f(xs):
    evens = 0
    odds = 0
    for x in xs:
        if x % 2 == 0:
            evens += x
        else:
            odds += x
    return evens, odds


INPUTS = [([],), ([1, 2, 3, 4],), ([5],), ([2, 2, 7],)]
