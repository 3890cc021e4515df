import math

import pytest
from hypothesis import given, settings, strategies as st

from wormhole_dtn.routing import (
    Message, ProphetParams, ProphetTable, forged_table, on_contact_epidemic, on_contact_first_contact,
    on_contact_spray_wait, prophet_update,
)


def msgs(*ids, dst=9):
    return [Message(i, 0, dst, 500_000, 0.0) for i in ids]


class TestEpidemic:
    def test_peer_has_everything(self):
        assert on_contact_epidemic(msgs(1, 2, 3), {1, 2, 3}) == []

    def test_peer_has_nothing(self):
        assert [m.id for m in on_contact_epidemic(msgs(1, 2, 3), set())] == [1, 2, 3]

    def test_partial_overlap(self):
        assert [m.id for m in on_contact_epidemic(msgs(1, 2, 3), {2})] == [1, 3]


class TestFirstContact:
    def test_everything_offered(self):
        assert [m.id for m in on_contact_first_contact(msgs(1, 2), peer=5)] == [1, 2]

    def test_message_for_the_peer_is_offered(self):
        assert [m.id for m in on_contact_first_contact(msgs(1, dst=5), peer=5)] == [1]

    def test_never_returns_to_a_visited_node(self):
        m = Message(1, 0, 9, 500_000, 0.0).forwarded(4, 1).forwarded(7, 1)
        assert on_contact_first_contact([m], peer=4) == []
        assert on_contact_first_contact([m], peer=0) == []


class TestSprayAndWait:
    def test_six_splits_three_three(self):
        d = on_contact_spray_wait(Message(1, 0, 9, 1, 0, copies=6), peer=3)
        assert (d.forward, d.give, d.keep) == (True, 3, 3)

    def test_single_copy_waits(self):
        assert not on_contact_spray_wait(Message(1, 0, 9, 1, 0, copies=1), peer=3).forward

    def test_single_copy_delivers_to_destination(self):
        d = on_contact_spray_wait(Message(1, 0, 9, 1, 0, copies=1), peer=9)
        assert d.forward and d.deliver

    @given(st.integers(1, 64))
    def test_split_conserves_copies(self, c):
        d = on_contact_spray_wait(Message(1, 0, 9, 1, 0, copies=c), peer=3)
        if d.forward:
            assert d.give + d.keep == c and d.give >= 1 and d.keep >= 1
        else:
            assert c == 1


class TestProphet:
    P = ProphetParams()

    def test_first_encounter(self):
        t = prophet_update(ProphetTable(), 0, 1, ProphetTable(), 0.0)
        assert t.P[1] == pytest.approx(0.75)

    def test_second_immediate_encounter(self):
        t = prophet_update(ProphetTable(), 0, 1, ProphetTable(), 0.0)
        t = prophet_update(t, 0, 1, ProphetTable(), 0.0)
        assert t.P[1] == pytest.approx(0.9375)

    def test_aging_two_units(self):
        t = ProphetTable({1: 0.9375}, 0.0).aged(60.0)
        assert t.P[1] == pytest.approx(0.9375 * 0.98**2) == pytest.approx(0.900375)
        assert t.last_aged == 60.0

    def test_get_ages_virtually(self):
        t = ProphetTable({1: 0.5}, 0.0)
        assert t.get(1, 30.0) == pytest.approx(0.49)
        assert t.get(1) == 0.5
        assert t.get(2, 30.0) == 0.0

    def test_transitivity_takes_max(self):
        mine = ProphetTable({5: 0.9}, 0.0)
        peer = ProphetTable({5: 0.5, 6: 0.8}, 0.0)
        t = prophet_update(mine, 0, 1, peer, 0.0)
        assert t.P[5] == 0.9
        assert t.P[6] == pytest.approx(0.75 * 0.8 * 0.25)
        assert 0 not in t.P

    def test_forged_table_is_maximal(self):
        f = forged_table(range(4), math.inf)
        assert all(f.get(n, 1e9) == 1.0 for n in range(4))

    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.floats(0, 500)), max_size=60),
           st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 1))
    def test_values_stay_in_unit_interval(self, encounters, p_init, beta, gamma):
        params = ProphetParams(p_init, beta, gamma, 30.0)
        tables = {n: ProphetTable() for n in range(6)}
        now = 0.0
        for a, b, dt in encounters:
            if a == b:
                continue
            now += dt
            ta, tb = tables[a], tables[b]
            tables[a] = prophet_update(ta, a, b, tb, now, params)
            tables[b] = prophet_update(tb, b, a, ta, now, params)
            for t in (tables[a], tables[b]):
                assert all(0.0 <= p <= 1.0 for p in t.P.values())
