"""fockforge: exact-arithmetic engine for Fock-space quantization of
semisimple Frobenius data at desk scale.

Subpackages follow the pipeline: exact scalars and series (``fields``,
``poly``, ``series``), stable graph enumeration (``graphs``), psi-class jets
of the point (``psi``), Fock-space containers and validators (``fock``),
Frobenius/R-matrix data (``frobenius``), propagators and the Feynman-rule
transformation (``quantize``), the symbolic anomaly certifier (``anomaly``),
and the config-driven CLI (``cli``).
"""

from .fields import FE, FieldElem

__all__ = ["FieldElem", "FE"]
__version__ = "0.1.0"
