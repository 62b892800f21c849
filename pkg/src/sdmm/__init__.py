"""Secure distributed matrix multiplication with grid-partition root-of-unity codes."""

from .field import FieldElement, PrimeField, RootOfUnity, find_field_modulus, nth_root_of_unity, power_sum
from .matrix import BlockGrid, DenseMatrix, DimensionError, partition, reassemble
from .scheme import (ExponentLayout, InvalidEvaluationOrder, PartitionParams, SchemePlan, ShareSet,
                     build_layout, closed_form_n, decode, encode, is_valid_n, make_plan, minimal_valid_n,
                     server_multiply)
from .harness import WorkerEndpoint, run_local, run_remote

__all__ = [
    "BlockGrid", "DenseMatrix", "DimensionError", "ExponentLayout", "FieldElement",
    "InvalidEvaluationOrder", "PartitionParams", "PrimeField", "RootOfUnity", "SchemePlan", "ShareSet",
    "build_layout", "closed_form_n", "decode", "encode", "find_field_modulus", "is_valid_n",
    "make_plan", "minimal_valid_n", "nth_root_of_unity", "partition", "power_sum", "reassemble",
    "run_local", "run_remote", "server_multiply", "WorkerEndpoint",
]
