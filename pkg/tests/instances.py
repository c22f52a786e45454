"""Small fixed instances shared by the test modules."""

from dynmatch.core import ArrivalModel, iid, new_instance
from dynmatch.models import LineLayout, directed_line, horizontal_2x2, vertical_instance

COIN = ArrivalModel((0, 1), (0.5, 0.5))
TRI = ArrivalModel((0, 1, 2), (0.25, 0.5, 0.25))


def h22(T=3, alpha=1, beta=1):
    r = [[[4, 1], [1, 3]]] * T
    return horizontal_2x2(r, alpha, beta, (iid([TRI, COIN], T), iid([COIN, TRI], T)))


def vert(T=3, alpha=1, beta=1):
    r_d = [[3, 2]] * T
    r_s = [[2, 0.5]] * T
    return vertical_instance(r_d, r_s, alpha, beta, (iid([COIN, TRI], T), iid([TRI, COIN], T)))


def line(T=2):
    layout = LineLayout((0, 1, 2), (0, 1, 2), [5.0, 4.0][:T])
    return directed_line(layout, 1, 0, (iid([COIN] * 3, T), iid([COIN] * 3, T)))


def with_costs(T=2):
    base = h22(T)
    c = [[0.5, 0.25]] * T
    h = [[0.25, 0.75]] * T
    return new_instance(
        2, 2, T, base.rewards, base.alpha, base.beta, base.demand_arrivals, base.supply_arrivals, waiting_costs={"c": c, "h": h}
    )


def drift(T=3):
    """Rewards of the natural pairs rise over time, so waiting can pay."""
    r = [[[2 + t, 0.5], [0.5, 1 + t]] for t in range(T)]
    return new_instance(2, 2, T, r, 1, 1, iid([COIN, COIN], T), iid([COIN, COIN], T))
