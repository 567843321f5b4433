"""Unit conversion factors to SI.

Data classes keep the table units (nm, fF, kOhm, uA, fA, V); arithmetic
converts through these factors.
"""

NM = 1e-9
UM = 1e-6
FF = 1e-15
AC = 1e-18
KOHM = 1e3
UA = 1e-6
FA = 1e-15
NS = 1e-9
FJ = 1e-15
MV = 1e-3
MM2 = 1e-6
GBIT = 1e9
