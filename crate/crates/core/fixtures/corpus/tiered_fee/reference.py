def tiered_fee(amount, tier):
    if tier == "gold":
        rate = 0.01
    elif tier == "silver":
        rate = 0.02
    else:
        rate = 0.03
    fee = amount * rate
    if fee < 1:
        fee = 1
    return round(fee, 2)
