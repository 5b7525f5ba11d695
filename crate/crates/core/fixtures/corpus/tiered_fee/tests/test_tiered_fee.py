from tiered_fee import tiered_fee


def test_gold():
    assert tiered_fee(1000, "gold") == 10.0


def test_bronze():
    assert tiered_fee(100, "bronze") == 3.0


def test_minimum_fee():
    assert tiered_fee(10, "gold") == 1


def test_silver():
    assert tiered_fee(1000, "silver") == 20.0


def test_silver_minimum():
    assert tiered_fee(10, "silver") == 1
