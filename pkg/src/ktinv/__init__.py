"""Exact and numerical K-theory invariants at desk scale.

Submodules:
    zmod      integer matrices, Smith form, f.g. abelian groups, Hom and Ext
    dimgrp    inductive systems, affine functions, the dimension map
    orderext  orderextensions: Baer sum, triviality, isomorphism, cocycles
    unitary   Bott elements, winding pairs, rotation numbers of unitary paths
    realize   realization certificates and the rotation-algebra classifier
    cli       command line front end
"""
__version__ = "0.1.0"
