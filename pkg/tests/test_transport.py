"""BLE connect/subscribe and Z-Wave event link behavior."""

import pytest

from sbsim.errors import AlreadyConnected, Disconnected, InvalidKind, NodeUnknown
from sbsim.rng import substream
from sbsim.transport import LinkFlavor, LinkSpec, TransportNet


def make_net(seed=0, loss=0.0, latency=0, zw_latency=None):
    net = TransportNet(seed=seed)
    net.add_link(LinkSpec("ble1", LinkFlavor.BLE, loss, latency))
    net.add_link(LinkSpec("zw1", LinkFlavor.ZWAVE, loss,
                          latency if zw_latency is None else zw_latency))
    for node in ("tag-1", "tag-2", "door-1"):
        net.add_node(node)
    return net


def test_linkspec_validates_loss_prob():
    with pytest.raises(ValueError):
        LinkSpec("x", LinkFlavor.BLE, loss_prob=1.5)
    with pytest.raises(ValueError):
        LinkSpec("x", LinkFlavor.BLE, latency_ticks=-1)


def test_first_connect_succeeds():
    net = make_net()
    conn = net.connect_ble("ble1", "tag-1")
    assert conn.alive and conn.node == "tag-1"


def test_double_connect_rejected():
    net = make_net()
    net.connect_ble("ble1", "tag-1")
    with pytest.raises(AlreadyConnected):
        net.connect_ble("ble1", "tag-1")


def test_connect_unknown_node():
    net = make_net()
    with pytest.raises(NodeUnknown):
        net.connect_ble("ble1", "ghost")


def test_subscribe_period_semantics():
    # 30 ticks at period 10, zero loss: exactly 3 notifications at 10, 20, 30
    net = make_net()
    conn = net.connect_ble("ble1", "tag-1")
    net.subscribe_ble(conn, "temperature", 10)
    frames = net.advance(30)
    assert [f.sent_at for f in frames] == [10, 20, 30]
    assert all(f.src == "tag-1" and f.dst == "hub" for f in frames)


def test_subscribe_invalid_kind():
    net = make_net()
    conn = net.connect_ble("ble1", "tag-1")
    with pytest.raises(InvalidKind):
        net.subscribe_ble(conn, "pressure", 10)


def test_subscribe_after_disconnect():
    net = make_net()
    conn = net.connect_ble("ble1", "tag-1")
    net.disconnect(conn)
    with pytest.raises(Disconnected):
        net.subscribe_ble(conn, "temperature", 10)


def test_unsubscribe_stops_notifications():
    net = make_net()
    conn = net.connect_ble("ble1", "tag-1")
    sub = net.subscribe_ble(conn, "humidity", 10)
    assert len(net.advance(20)) == 2
    net.unsubscribe(sub)
    assert net.advance(50) == []


def test_seeded_loss_replay_oracle():
    # oracle: replay the link's Bernoulli stream directly (one draw per frame)
    seed, loss = 42, 0.5
    rng = substream(seed, "loss", "ble1")
    expected = sum(1 for _ in range(30) if rng.random() >= loss)
    assert expected == 22  # frozen from the replay above

    net = make_net(seed=seed, loss=loss)
    conn = net.connect_ble("ble1", "tag-1")
    net.subscribe_ble(conn, "humidity", 10)
    frames = net.advance(300)
    assert len(frames) == expected


def test_zwave_event_latency():
    net = make_net(zw_latency=2)
    net.register_zwave("zw1", "door-1")
    net.emit_zwave_event("zw1", "door-1", {"event": "open"})
    assert net.advance(1) == []  # not yet: latency 2
    frames = net.advance(1)
    assert len(frames) == 1 and frames[0].sent_at == 0


def test_zwave_certain_loss_never_delivers():
    net = TransportNet(seed=3)
    net.add_link(LinkSpec("zw1", LinkFlavor.ZWAVE, loss_prob=1.0))
    net.add_node("door-1")
    net.register_zwave("zw1", "door-1")
    net.emit_zwave_event("zw1", "door-1", b"e")
    assert net.advance(100) == []


def test_zwave_unregistered_node():
    net = make_net()
    with pytest.raises(NodeUnknown):
        net.emit_zwave_event("zw1", "door-1", b"e")  # registered nodes only


def test_zwave_fifo_order_100_events():
    net = make_net()
    net.register_zwave("zw1", "door-1")
    for i in range(100):
        net.emit_zwave_event("zw1", "door-1", i)
    frames = net.advance(10)
    assert [f.payload for f in frames] == list(range(100))
    assert [f.seq for f in frames] == list(range(100))


def test_advance_empty_queues():
    net = make_net()
    assert net.advance(100) == []


def test_same_tick_orders_by_src():
    net = make_net()
    net2 = net  # both nodes on one zwave link
    zw = LinkSpec("zw2", LinkFlavor.ZWAVE)
    net2.add_link(zw)
    net2.register_zwave("zw2", "tag-2")
    net2.register_zwave("zw2", "tag-1")
    net2.emit_zwave_event("zw2", "tag-2", "b")
    net2.emit_zwave_event("zw2", "tag-1", "a")
    frames = net2.advance(1)
    assert [f.src for f in frames] == ["tag-1", "tag-2"]  # (tick, src, seq) order


def test_determinism_same_seed_same_sequence():
    def run():
        net = make_net(seed=9, loss=0.3)
        conn = net.connect_ble("ble1", "tag-1")
        net.subscribe_ble(conn, "temperature", 7)
        net.register_zwave("zw1", "door-1")
        for i in range(20):
            net.emit_zwave_event("zw1", "door-1", i)
        return [(f.src, f.seq, f.sent_at) for f in net.advance(200)]
    assert run() == run()


def test_source_callback_supplies_payloads():
    net = make_net()
    conn = net.connect_ble("ble1", "tag-1")
    net.subscribe_ble(conn, "temperature", 10, source=lambda t: {"at": t})
    frames = net.advance(30)
    assert [f.payload["at"] for f in frames] == [10, 20, 30]


def test_source_none_skips_notification():
    net = make_net()
    conn = net.connect_ble("ble1", "tag-1")
    net.subscribe_ble(conn, "temperature", 10,
                      source=lambda t: None if t == 20 else {"at": t})
    frames = net.advance(30)
    assert [f.payload["at"] for f in frames] == [10, 30]
