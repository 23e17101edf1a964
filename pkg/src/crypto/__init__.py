"""
Cryptographic building blocks

Curve arithmetic and hashing, linkable ring signatures, and ballot
confidentiality (threshold key sharing, hybrid encryption, commitments).
"""

from .curve import CurveParams, EllipticCurve, load_curve, toy_curve, secp256k1_curve
from .lsag import KeyPair, PublicKeyRing, RingSignature, keygen, sign, verify, link

__all__ = [
    'CurveParams',
    'EllipticCurve',
    'load_curve',
    'toy_curve',
    'secp256k1_curve',
    'KeyPair',
    'PublicKeyRing',
    'RingSignature',
    'keygen',
    'sign',
    'verify',
    'link',
]
