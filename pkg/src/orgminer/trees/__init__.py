"""Decision-tree induction (CART, gain ratio, CHAID) and their accuracy comparison."""

from .criteria import chi_square, entropy, gain_ratio, gini, information_gain
from .evaluate import HEADERS, ComparisonTable, compare_algorithms, evaluate
from .growth import TreeParams, grow_tree, merge_categories
from .model import ALGORITHMS, DISPLAY_NAMES, Node, Split, Tree, predict
from .sampling import stratified_folds, stratified_split

__all__ = [
    "ALGORITHMS",
    "DISPLAY_NAMES",
    "HEADERS",
    "ComparisonTable",
    "Node",
    "Split",
    "Tree",
    "TreeParams",
    "chi_square",
    "compare_algorithms",
    "entropy",
    "evaluate",
    "gain_ratio",
    "gini",
    "grow_tree",
    "information_gain",
    "merge_categories",
    "predict",
    "stratified_folds",
    "stratified_split",
]
