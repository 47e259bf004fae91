import pytest

from sbsim.scenario import parse_scenario

ONE_ROOM = """
room lab temp=25.0 t_env=15.0 tau=6000 heater_w=1000 c=500000
node tag-1 room=lab kinds=temperature,humidity,luminance sigma=0.0 period=10
node door-1 room=lab kinds=door
node counter-1 room=lab kinds=people-counter
node heater-1 room=lab kinds=relay drives=heater
node lamp-1 room=lab kinds=relay drives=lamp lux_delta=350
"""

BEACON_ROOM = """
room den temp=21.0 t_env=10.0 tau=36000 heater_w=1200 c=400000
node tag-d room=den kinds=temperature sigma=0.0 period=10
node band-d room=den kinds=presence-beacon mac=AA:BB:CC:DD:EE:01 period=10
node door-d room=den kinds=door
node counter-d room=den kinds=people-counter
node heater-d room=den kinds=relay
"""


@pytest.fixture
def one_room():
    return parse_scenario(ONE_ROOM)


@pytest.fixture
def beacon_room():
    return parse_scenario(BEACON_ROOM)
