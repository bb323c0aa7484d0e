"""Baseband modem for a chirp-preamble, DSSS-CPFSK LPWAN PHY, with closed-form
analysis and a Monte-Carlo harness."""

from .phy import DEFAULT_PARAMS, IqBuffer, ParamError, PhyParams, RandomStream, validate_params
from .coding import FrameHeader, HeaderError, SpreadingSequence
from .channel import ChannelKind, ChannelSpec
from .sync import DetectorConfig, SyncReport
from .demod import MatchedFilterPair
from .theory import CfoDistribution, TheoryPoint

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PARAMS", "IqBuffer", "ParamError", "PhyParams", "RandomStream", "validate_params",
    "FrameHeader", "HeaderError", "SpreadingSequence", "ChannelKind", "ChannelSpec",
    "DetectorConfig", "SyncReport", "MatchedFilterPair", "CfoDistribution", "TheoryPoint",
]
