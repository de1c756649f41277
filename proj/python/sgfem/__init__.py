"""Adaptive stochastic Galerkin FEM for lognormal diffusion problems."""

try:
    from . import _core
except ImportError:  # in-tree layout: the extension lives in the CMake build dir
    import _core

ModeScaling = _core.ModeScaling
Mesh2D = _core.Mesh2D
MultiIndexSet = _core.MultiIndexSet
RunConfig = _core.RunConfig
SgfemError = _core.SgfemError
bisect = _core.bisect
doerfler_mark_det = _core.doerfler_mark_det
doerfler_mark_sto = _core.doerfler_mark_sto
hermite_eval = _core.hermite_eval
index_set_boundary = _core.index_set_boundary
initial_lshape = _core.initial_lshape
initial_unit_square = _core.initial_unit_square
ledger_csv = _core.ledger_csv
load_config = _core.load_config
lookahead_slab = _core.lookahead_slab
parse_config_text = _core.parse_config_text
riemann_zeta = _core.riemann_zeta
run_benchmark = _core.run_benchmark
run_pipeline = _core.run_pipeline
triple_product_1d = _core.triple_product_1d
uniform_refine = _core.uniform_refine

__all__ = [
    "ModeScaling",
    "Mesh2D",
    "MultiIndexSet",
    "RunConfig",
    "SgfemError",
    "bisect",
    "doerfler_mark_det",
    "doerfler_mark_sto",
    "hermite_eval",
    "index_set_boundary",
    "initial_lshape",
    "initial_unit_square",
    "ledger_csv",
    "load_config",
    "lookahead_slab",
    "parse_config_text",
    "riemann_zeta",
    "run_benchmark",
    "run_pipeline",
    "triple_product_1d",
    "uniform_refine",
]
