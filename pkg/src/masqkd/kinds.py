"""Enumerations shared by the protocol engine, adversary and harness."""

from enum import Enum


class ProtocolKind(str, Enum):
    BASE = "base"
    IMPROVED = "improved"
    KRAWEC = "krawec"


class Action(str, Enum):
    REFLECT = "reflect"
    MEASURE_RESEND = "measure_resend"


class Case(int, Enum):
    CASE1 = 1
    CASE2 = 2
    CASE3 = 3


class AttackKind(str, Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"
    COLLECTIVE_S1 = "collective_s1"
    COLLECTIVE_S2 = "collective_s2"


class Location(str, Enum):
    """Channel leg.  For Krawec's protocol ``TP_TO_ALICE`` is C->A and
    ``ALICE_TO_BOB`` is Alice's outgoing leg A->C."""

    TP_TO_ALICE = "tp_to_alice"
    ALICE_TO_BOB = "alice_to_bob"
    BOB_TO_TP = "bob_to_tp"


class EfficiencyConvention(str, Enum):
    RAW_OVER_PREPARED = "raw_over_prepared"
    FINAL_OVER_PREPARED = "final_over_prepared"


# integer codes used inside the compiled kernels
PROTOCOL_CODE = {ProtocolKind.BASE: 0, ProtocolKind.IMPROVED: 1, ProtocolKind.KRAWEC: 2}
LOCATION_CODE = {Location.TP_TO_ALICE: 0, Location.ALICE_TO_BOB: 1, Location.BOB_TO_TP: 2}
