import pytest

from ddcocycle import signs as S
from ddcocycle.nerve import SignProbeError


def test_every_frozen_sign_has_provenance():
    assert set(S.FROZEN) == set(S.PROVENANCE)
    for name, value in S.FROZEN.items():
        assert value in (1, -1, "conjugate", "inverse"), name


def test_reprobe_accepts_the_frozen_value():
    probe = S.reprobe("chern d'/d'' relative sign", lambda s: 1e-9 if s == S.CHERN else 1.0, 1e-6)
    assert probe.value == S.CHERN


def test_reprobe_rejects_a_flipped_value():
    with pytest.raises(SignProbeError, match="frozen"):
        S.reprobe("tau (ii)", lambda s: 1e-9 if s == -S.TAU_SECTION else 1.0, 1e-6)
