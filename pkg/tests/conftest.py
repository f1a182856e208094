import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

from phasetip.records import Arm, SubjectRecord

E, C = Arm.EXPERIMENTAL, Arm.CONTROL


def rec(sid, arm, s, delta, cutoff=100.0, mono=None, stratum=None):
    """Shorthand SubjectRecord constructor for fixtures."""
    return SubjectRecord(
        subject_id=str(sid), arm=arm, s=float(s), delta=int(delta),
        cutoff=float(cutoff), mono_start=mono, stratum=stratum,
    )
