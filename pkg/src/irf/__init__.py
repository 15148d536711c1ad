"""Iterative random forests."""

from ._backend import BACKEND
from .data import Dataset, FeatureGrouping, SplitSpec, load_csv, load_grouping, write_csv
from .forest import Forest, ForestParams
from .pipeline import IrfError, IrfParams, IrfResult, fit, select_k
from .rit import RitParams, Transaction
from .tree import DecisionTree, TreeParams

__all__ = [
    "BACKEND",
    "Dataset",
    "DecisionTree",
    "FeatureGrouping",
    "Forest",
    "ForestParams",
    "IrfError",
    "IrfParams",
    "IrfResult",
    "RitParams",
    "SplitSpec",
    "Transaction",
    "TreeParams",
    "fit",
    "load_csv",
    "load_grouping",
    "select_k",
    "write_csv",
]
