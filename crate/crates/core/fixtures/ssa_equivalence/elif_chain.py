def f(score):
    if score >= 90:
        grade = "A"
    elif score >= 80:
        grade = "B"
    elif score >= 70:
        grade = "C"
    else:
        grade = "F"
    return grade


INPUTS = [(95,), (85,), (75,), (10,), (90,)]
